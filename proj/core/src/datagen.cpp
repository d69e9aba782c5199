#include "sar/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sar/errors.hpp"
#include "sar/rng.hpp"

namespace sar {

namespace {

constexpr std::uint64_t kMeanStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSplitStream = 3;
constexpr int kMeanAttempts = 1000;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "'");
    }
}

} // namespace

std::vector<long> class_counts(std::size_t classes, std::size_t n_max, double beta) {
    if (classes < 2) throw InputError("class_counts: need at least 2 classes");
    if (n_max < 1) throw InputError("class_counts: n_max must be at least 1");
    if (beta < 1.0) throw InputError("class_counts: beta must be >= 1");

    std::vector<long> counts(classes);
    const double denom = static_cast<double>(classes - 1);
    for (std::size_t c = 0; c < classes; ++c) {
        const double frac = static_cast<double>(c) / denom;
        const double raw = static_cast<double>(n_max) * std::pow(beta, -frac);
        counts[c] = std::max(1l, std::lround(raw));
    }
    return counts;
}

LongTailDataset sample_gmm(const GmmSpec& spec) {
    return sample_gmm(spec, class_counts(spec.classes, spec.n_max, spec.beta));
}

LongTailDataset sample_gmm(const GmmSpec& spec, const std::vector<long>& counts) {
    const std::size_t c = spec.classes, d = spec.input_dim;
    if (counts.size() != c) throw InputError("sample_gmm: counts length mismatch");
    if (d == 0) throw InputError("sample_gmm: input_dim must be positive");

    // class means: iid Gaussian at a scale that keeps typical pairwise
    // distance ~25% above the separation floor, then rejection until every
    // pair clears class_separation * noise_sigma
    const double sigma_eff = spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0;
    const double min_dist = spec.class_separation * spec.noise_sigma;
    const double scale =
        1.25 * spec.class_separation * sigma_eff / std::sqrt(2.0 * static_cast<double>(d));

    Rng mean_rng(derive_seed(spec.seed, kMeanStream));
    Tensor2D means(c, d, false);
    for (std::size_t i = 0; i < c; ++i) {
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt >= kMeanAttempts)
                throw CapabilityError(
                    "sample_gmm: could not place class means at the requested separation; "
                    "increase input_dim or lower class_separation");
            for (std::size_t k = 0; k < d; ++k) means.at(i, k) = scale * mean_rng.normal();
            bool ok = true;
            for (std::size_t j = 0; j < i && ok; ++j) {
                double dist2 = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = means.at(i, k) - means.at(j, k);
                    dist2 += diff * diff;
                }
                ok = dist2 >= min_dist * min_dist;
            }
            if (ok) break;
        }
    }

    std::size_t n = 0;
    for (long cnt : counts) {
        if (cnt < 0) throw InputError("sample_gmm: negative class count");
        n += static_cast<std::size_t>(cnt);
    }

    LongTailDataset ds;
    ds.spec = spec;
    ds.class_counts = counts;
    ds.X = Tensor2D(n, d, false);
    ds.y.resize(n);

    Rng noise_rng(derive_seed(spec.seed, kNoiseStream));
    std::size_t row = 0;
    for (std::size_t i = 0; i < c; ++i) {
        for (long s = 0; s < counts[i]; ++s, ++row) {
            ds.y[row] = static_cast<int>(i);
            for (std::size_t k = 0; k < d; ++k)
                ds.X.at(row, k) = means.at(i, k) + spec.noise_sigma * noise_rng.normal();
        }
    }
    return ds;
}

std::pair<LongTailDataset, LongTailDataset> split(const LongTailDataset& ds,
                                                  std::size_t test_per_class,
                                                  std::uint64_t seed) {
    const std::size_t c = ds.class_counts.size();
    for (std::size_t i = 0; i < c; ++i)
        if (test_per_class > 0 &&
            static_cast<std::size_t>(ds.class_counts[i]) <= test_per_class)
            throw InputError("split: class " + std::to_string(i) + " has only " +
                             std::to_string(ds.class_counts[i]) + " samples, need more than " +
                             std::to_string(test_per_class));

    std::vector<std::vector<std::size_t>> by_class(c);
    for (std::size_t r = 0; r < ds.size(); ++r)
        by_class[static_cast<std::size_t>(ds.y[r])].push_back(r);

    std::vector<std::uint8_t> is_test(ds.size(), 0);
    Rng rng(derive_seed(seed, kSplitStream));
    for (std::size_t i = 0; i < c; ++i) {
        auto idx = by_class[i];
        rng.shuffle(idx);
        for (std::size_t t = 0; t < test_per_class; ++t) is_test[idx[t]] = 1;
    }

    const std::size_t d = ds.X.cols();
    auto take = [&](bool want_test) {
        LongTailDataset out;
        out.spec = ds.spec;
        out.class_counts.assign(c, 0);
        std::size_t n = 0;
        for (std::size_t r = 0; r < ds.size(); ++r)
            if ((is_test[r] != 0) == want_test) ++n;
        out.X = Tensor2D(n, d, false);
        out.y.resize(n);
        std::size_t row = 0;
        for (std::size_t r = 0; r < ds.size(); ++r) {
            if ((is_test[r] != 0) != want_test) continue;
            out.y[row] = ds.y[r];
            ++out.class_counts[static_cast<std::size_t>(ds.y[r])];
            for (std::size_t k = 0; k < d; ++k) out.X.at(row, k) = ds.X.at(r, k);
            ++row;
        }
        return out;
    };
    return {take(false), take(true)};
}

std::pair<LongTailDataset, LongTailDataset> make_train_test(const GmmSpec& spec,
                                                            std::size_t test_per_class) {
    auto counts = class_counts(spec.classes, spec.n_max, spec.beta);
    for (auto& cnt : counts) cnt += static_cast<long>(test_per_class);
    LongTailDataset pool = sample_gmm(spec, counts);
    return split(pool, test_per_class, spec.seed);
}

void save_csv(const LongTailDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("save_csv: cannot write " + path);
    const std::size_t d = ds.X.cols();
    out << "label";
    for (std::size_t k = 0; k < d; ++k) out << ",f_" << k;
    out << "\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        out << ds.y[r];
        for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(ds.X.at(r, k));
        out << "\n";
    }
    out.close();

    std::ofstream meta(path + ".meta");
    if (!meta) throw InputError("save_csv: cannot write " + path + ".meta");
    meta << "classes=" << ds.spec.classes << "\n"
         << "input_dim=" << ds.spec.input_dim << "\n"
         << "n_max=" << ds.spec.n_max << "\n"
         << "beta=" << format_double(ds.spec.beta) << "\n"
         << "class_separation=" << format_double(ds.spec.class_separation) << "\n"
         << "noise_sigma=" << format_double(ds.spec.noise_sigma) << "\n"
         << "seed=" << ds.spec.seed << "\n";
}

LongTailDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_csv: cannot open " + path);

    std::string header;
    if (!std::getline(in, header) || header.empty())
        throw ParseError("load_csv: " + path + " is empty");
    if (header.rfind("label", 0) != 0)
        throw ParseError("line 1: expected header starting with 'label', got '" + header + "'");
    std::size_t dims = 0;
    {
        std::stringstream hs(header);
        std::string col;
        std::getline(hs, col, ',');
        std::size_t k = 0;
        while (std::getline(hs, col, ',')) {
            if (col != "f_" + std::to_string(k))
                throw ParseError("line 1: expected column f_" + std::to_string(k) + ", got '" +
                                 col + "'");
            ++k;
        }
        dims = k;
    }
    if (dims == 0) throw ParseError("line 1: header has no feature columns");

    std::vector<int> labels;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ','))
            throw ParseError("line " + std::to_string(line_no) + ": missing label");
        int lab = 0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), lab);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || lab < 0)
            throw ParseError("line " + std::to_string(line_no) + ": bad label '" + cell + "'");
        labels.push_back(lab);
        std::size_t k = 0;
        while (std::getline(ls, cell, ',')) {
            values.push_back(parse_double(cell, line_no));
            ++k;
        }
        if (k != dims)
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dims) + " features, got " + std::to_string(k));
    }
    if (labels.empty()) throw ParseError("load_csv: " + path + " has no data rows");

    LongTailDataset ds;
    ds.y = std::move(labels);
    ds.X = Tensor2D::from_values(ds.y.size(), dims, std::move(values), false);

    // spec comes from the sidecar; class counts are recomputed from labels
    std::ifstream meta(path + ".meta");
    if (!meta) throw ParseError("load_csv: missing sidecar " + path + ".meta");
    std::string mline;
    std::size_t mline_no = 0;
    while (std::getline(meta, mline)) {
        ++mline_no;
        if (mline.empty()) continue;
        const auto eq = mline.find('=');
        if (eq == std::string::npos)
            throw ParseError("meta line " + std::to_string(mline_no) + ": expected key=value");
        const std::string key = mline.substr(0, eq);
        const std::string val = mline.substr(eq + 1);
        if (key == "classes") ds.spec.classes = std::stoul(val);
        else if (key == "input_dim") ds.spec.input_dim = std::stoul(val);
        else if (key == "n_max") ds.spec.n_max = std::stoul(val);
        else if (key == "beta") ds.spec.beta = parse_double(val, mline_no);
        else if (key == "class_separation") ds.spec.class_separation = parse_double(val, mline_no);
        else if (key == "noise_sigma") ds.spec.noise_sigma = parse_double(val, mline_no);
        else if (key == "seed") ds.spec.seed = std::stoull(val);
        else throw ParseError("meta line " + std::to_string(mline_no) + ": unknown key '" + key + "'");
    }
    if (ds.spec.input_dim != dims)
        throw ParseError("load_csv: sidecar input_dim " + std::to_string(ds.spec.input_dim) +
                         " does not match CSV columns " + std::to_string(dims));

    ds.class_counts.assign(ds.spec.classes, 0);
    for (int lab : ds.y) {
        if (static_cast<std::size_t>(lab) >= ds.spec.classes)
            throw ParseError("load_csv: label " + std::to_string(lab) + " outside sidecar classes");
        ++ds.class_counts[static_cast<std::size_t>(lab)];
    }
    return ds;
}

} // namespace sar
