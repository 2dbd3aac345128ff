#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "smallgeo/errors.hpp"
#include "smallgeo/eval.hpp"

namespace smallgeo {

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
    const auto row = counts.begin() + static_cast<std::ptrdiff_t>(truth * (k() + 1));
    return std::accumulate(row, row + static_cast<std::ptrdiff_t>(k() + 1), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& truth, std::span<const std::uint8_t> class_ids) {
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
        throw DimensionError("prediction is " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                             ", truth is " + std::to_string(truth.width()) + "x" + std::to_string(truth.height()));
    }
    ConfusionMatrix cm;
    cm.class_ids.assign(class_ids.begin(), class_ids.end());
    const std::size_t k = cm.k();
    cm.counts.assign(k * (k + 1), 0);
    std::array<int, 256> index{};
    index.fill(-1);
    for (std::size_t i = 0; i < k; ++i) {
        if (cm.class_ids[i] == 0 || index[cm.class_ids[i]] >= 0) {
            throw ValidationError("confusion class ids must be unique and nonzero");
        }
        index[cm.class_ids[i]] = static_cast<int>(i);
    }
    const auto& t = truth.labels();
    const auto& p = pred.labels();
    for (std::size_t px = 0; px < t.size(); ++px) {
        if (t[px] == 0) continue;
        const int ti = index[t[px]];
        const int pi = p[px] == 0 ? static_cast<int>(k) : index[p[px]];
        if (ti < 0 || pi < 0) {
            throw SchemaMismatchError("class id " + std::to_string(ti < 0 ? t[px] : p[px]) +
                                      " is not in the evaluation class list");
        }
        ++cm.counts[static_cast<std::size_t>(ti) * (k + 1) + static_cast<std::size_t>(pi)];
    }
    return cm;
}

ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& truth) {
    std::array<bool, 256> seen{};
    for (auto v : truth.labels()) seen[v] = true;
    for (auto v : pred.labels()) seen[v] = true;
    std::vector<std::uint8_t> ids;
    for (int id = 1; id < 256; ++id) {
        if (seen[id]) ids.push_back(static_cast<std::uint8_t>(id));
    }
    return confusion(pred, truth, ids);
}

const ClassMetric* ClassMetrics::find(std::uint8_t id) const {
    for (const auto& c : classes) {
        if (c.class_id == id) return &c;
    }
    return nullptr;
}

ClassMetrics metrics(const ConfusionMatrix& cm) {
    ClassMetrics out;
    const std::size_t k = cm.k();
    double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetric m;
        m.class_id = cm.class_ids[c];
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t predicted = 0;
        for (std::size_t r = 0; r < k; ++r) predicted += cm.at(r, c);
        m.support = cm.support(c);
        if (predicted > 0) m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
        else m.precision_undefined = true;
        if (m.support > 0) m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
        else m.recall_undefined = true;
        const double denom = m.precision + m.recall;
        if (denom > 0.0) m.f1 = 2.0 * m.precision * m.recall / denom;
        else m.f1_undefined = true;
        if (m.support > 0) {
            sum_p += m.precision;
            sum_r += m.recall;
            sum_f += m.f1;
            ++out.macro_classes;
        }
        out.classes.push_back(m);
    }
    if (out.macro_classes > 0) {
        const auto n = static_cast<double>(out.macro_classes);
        out.macro_precision = sum_p / n;
        out.macro_recall = sum_r / n;
        out.macro_f1 = sum_f / n;
    }
    return out;
}

namespace {

void check_models(std::span<const ModelReport> models, const ClassSchema& schema) {
    const auto ids = schema.ids();
    for (const auto& m : models) {
        if (m.confusion.class_ids != ids || m.metrics.classes.size() != ids.size()) {
            throw SchemaMismatchError("model '" + m.model + "' was not scored on the report schema");
        }
    }
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string report_json(std::span<const ModelReport> models, const ClassSchema& schema) {
    using nlohmann::ordered_json;
    check_models(models, schema);
    ordered_json doc;
    doc["models"] = ordered_json::array();
    for (const auto& m : models) doc["models"].push_back(m.model);
    doc["classes"] = ordered_json::array();
    for (const auto& e : schema.entries()) doc["classes"].push_back({{"class_id", e.id}, {"name", e.name}});
    doc["results"] = ordered_json::array();
    for (const auto& m : models) {
        ordered_json r;
        r["model"] = m.model;
        const std::size_t k = m.confusion.k();
        ordered_json rows = ordered_json::array();
        for (std::size_t t = 0; t < k; ++t) {
            ordered_json row = ordered_json::array();
            for (std::size_t p = 0; p <= k; ++p) row.push_back(m.confusion.at(t, p));
            rows.push_back(std::move(row));
        }
        r["confusion"] = std::move(rows);
        r["confusion_columns"] = "one per class, then unclassified";
        ordered_json per_class = ordered_json::array();
        for (const auto& c : m.metrics.classes) {
            ordered_json undefined = ordered_json::array();
            if (c.precision_undefined) undefined.push_back("precision");
            if (c.recall_undefined) undefined.push_back("recall");
            if (c.f1_undefined) undefined.push_back("f1");
            per_class.push_back({{"class_id", c.class_id},
                                 {"precision", c.precision},
                                 {"recall", c.recall},
                                 {"f1", c.f1},
                                 {"support", c.support},
                                 {"undefined", std::move(undefined)}});
        }
        r["per_class"] = std::move(per_class);
        r["macro"] = {{"precision", m.metrics.macro_precision},
                      {"recall", m.metrics.macro_recall},
                      {"f1", m.metrics.macro_f1},
                      {"classes", m.metrics.macro_classes}};
        doc["results"].push_back(std::move(r));
    }
    return doc.dump(2) + "\n";
}

std::string report_table(std::span<const ModelReport> models, const ClassSchema& schema) {
    check_models(models, schema);
    std::size_t name_width = std::string("macro F1").size();
    for (const auto& e : schema.entries()) name_width = std::max(name_width, e.name.size());
    std::size_t col_width = 5;
    for (const auto& m : models) col_width = std::max(col_width, m.model.size());

    auto pad_right = [](std::string s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    auto pad_left = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };

    std::string out = pad_right("class", name_width);
    for (const auto& m : models) out += "  " + pad_left(m.model, col_width);
    out += "\n";
    const auto& entries = schema.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out += pad_right(entries[i].name, name_width);
        for (const auto& m : models) {
            const auto& c = m.metrics.classes[i];
            out += "  " + pad_left(c.support > 0 ? fixed3(c.f1) : "-", col_width);
        }
        out += "\n";
    }
    out += pad_right("macro F1", name_width);
    for (const auto& m : models) out += "  " + pad_left(fixed3(m.metrics.macro_f1), col_width);
    out += "\n";
    return out;
}

void write_report(std::span<const ModelReport> models, const ClassSchema& schema,
                  const std::filesystem::path& json_path, const std::filesystem::path& text_path) {
    const auto json = report_json(models, schema);
    const auto table = report_table(models, schema);
    for (const auto& [path, body] : {std::pair{json_path, json}, std::pair{text_path, table}}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << body;
        if (!out) throw IoError("write failed: " + path.string());
    }
}

} // namespace smallgeo
