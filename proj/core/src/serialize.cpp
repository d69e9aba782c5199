#include "sar/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sar/errors.hpp"

namespace sar {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

nlohmann::json vec_to_json(const std::vector<double>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v)
        arr.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
    return arr;
}

std::vector<double> vec_from_json(const nlohmann::json& arr) {
    std::vector<double> v;
    v.reserve(arr.size());
    for (const auto& x : arr)
        v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                : x.get<double>());
    return v;
}

} // namespace

std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_anchor_csv(const std::string& path, const Tensor2D& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << "class_id";
    for (std::size_t k = 0; k < rows.cols(); ++k) out << ",dim_" << k;
    out << "\n";
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        out << r;
        for (std::size_t k = 0; k < rows.cols(); ++k) out << ',' << format_full(rows.at(r, k));
        out << "\n";
    }
}

void write_square_matrix_csv(const std::string& path, const Tensor2D& m) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << "class_id";
    for (std::size_t k = 0; k < m.cols(); ++k) out << ",c_" << k;
    out << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << r;
        for (std::size_t k = 0; k < m.cols(); ++k) {
            out << ',';
            if (!std::isnan(m.at(r, k))) out << format_full(m.at(r, k));
        }
        out << "\n";
    }
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["overall_acc"] = report.overall_acc;
    j["per_class_acc"] = vec_to_json(report.per_class_acc);
    j["head_acc"] = std::isnan(report.head_acc) ? nlohmann::json(nullptr)
                                                : nlohmann::json(report.head_acc);
    j["body_acc"] = std::isnan(report.body_acc) ? nlohmann::json(nullptr)
                                                : nlohmann::json(report.body_acc);
    j["tail_acc"] = std::isnan(report.tail_acc) ? nlohmann::json(nullptr)
                                                : nlohmann::json(report.tail_acc);
    j["compactness"] = report.compactness;
    j["separability"] = report.separability;
    j["hbt_rule"] = report.hbt_rule;
    j["singleton_classes"] = report.singleton_classes;
    nlohmann::json dep = nlohmann::json::array();
    for (std::size_t r = 0; r < report.dependency.rows(); ++r) {
        std::vector<double> row(report.dependency.cols());
        for (std::size_t k = 0; k < report.dependency.cols(); ++k)
            row[k] = report.dependency.at(r, k);
        dep.push_back(vec_to_json(row));
    }
    j["dependency"] = dep;
    return j;
}

nlohmann::json step_record_to_json(const StepRecord& rec) {
    nlohmann::json j;
    j["step"] = rec.step;
    j["lr"] = rec.lr;
    j["loss_total"] = rec.loss_total;
    j["loss_ce"] = rec.loss_ce;
    j["loss_reg"] = rec.loss_reg;
    j["reg_empty"] = rec.reg_empty;
    if (rec.eval_acc >= 0.0) j["eval_acc"] = rec.eval_acc;
    if (!rec.conf.empty()) {
        j["loss_aux"] = rec.loss_aux;
        j["aux_frozen"] = rec.aux_frozen;
        j["conf"] = vec_to_json(rec.conf);
        j["w"] = vec_to_json(rec.weights);
        j["conf_gate"] = vec_to_json(rec.conf_gate);
        j["active"] = rec.active;
        j["initialized"] = rec.initialized;
        j["head_checksum"] = rec.head_checksum;
        if (!rec.embedded.empty()) {
            j["embedded"] = vec_to_json(rec.embedded);
            j["a_hat"] = vec_to_json(rec.a_hat);
        }
    }
    return j;
}

StepRecord step_record_from_json(const nlohmann::json& j) {
    StepRecord rec;
    rec.step = j.at("step").get<long>();
    rec.lr = j.at("lr").get<double>();
    rec.loss_total = j.at("loss_total").get<double>();
    rec.loss_ce = j.at("loss_ce").get<double>();
    rec.loss_reg = j.at("loss_reg").get<double>();
    rec.reg_empty = j.at("reg_empty").get<bool>();
    if (j.contains("eval_acc")) rec.eval_acc = j.at("eval_acc").get<double>();
    if (j.contains("conf")) {
        rec.loss_aux = j.at("loss_aux").get<double>();
        rec.aux_frozen = j.at("aux_frozen").get<bool>();
        rec.conf = vec_from_json(j.at("conf"));
        rec.weights = vec_from_json(j.at("w"));
        rec.conf_gate = vec_from_json(j.at("conf_gate"));
        rec.active = j.at("active").get<std::vector<std::uint8_t>>();
        rec.initialized = j.at("initialized").get<std::vector<std::uint8_t>>();
        rec.head_checksum = j.at("head_checksum").get<std::uint64_t>();
        if (j.contains("embedded")) {
            rec.embedded = vec_from_json(j.at("embedded"));
            rec.a_hat = vec_from_json(j.at("a_hat"));
        }
    }
    return rec;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << content;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(h, buf, static_cast<std::size_t>(in.gcount()));
    return h;
}

std::uint64_t tree_checksum(const std::string& root) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& rel : files) {
        h = fnv1a(h, rel.data(), rel.size());
        const std::uint64_t fh = file_checksum((fs::path(root) / rel).string());
        h = fnv1a(h, reinterpret_cast<const char*>(&fh), sizeof(fh));
    }
    return h;
}

} // namespace sar
