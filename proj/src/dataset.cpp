#include "bnnprobe/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bnnprobe/error.hpp"
#include "bnnprobe/rng.hpp"

namespace bnnprobe {

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
    const std::size_t n = input_dim();
    std::vector<double> out;
    out.reserve(idx.size() * n);
    std::vector<int> labs;
    labs.reserve(idx.size());
    for (std::size_t i : idx) {
        if (i >= size()) throw InvalidArgument("subset index out of range");
        out.insert(out.end(), features.begin() + i * n, features.begin() + (i + 1) * n);
        labs.push_back(labels[i]);
    }
    return {Tensor::matrix(idx.size(), n, std::move(out)), std::move(labs), num_classes};
}

namespace {

double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(where + ": cannot parse number '" +
                          std::string(s) + "'");
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path.string());
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t width = 0;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        const std::string where = path.string() + ":" + std::to_string(line);
        if (text.empty() || text == "\r") continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = text.find(',', start);
            row.push_back(parse_double(std::string_view(text).substr(start, comma - start), where));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (row.size() < 2) throw ConfigError(where + ": no features");
        if (width == 0) width = row.size() - 1;
        if (row.size() - 1 != width) {
            throw ConfigError(where + ": expected " +
                              std::to_string(width) + " features");
        }
        const double lab = row.front();
        if (lab < 0 || lab != std::floor(lab)) {
            throw ConfigError(where + ": label must be a nonnegative integer");
        }
        labels.push_back(static_cast<int>(lab));
        values.insert(values.end(), row.begin() + 1, row.end());
    }
    if (labels.empty()) throw ConfigError("dataset " + path.string() + " is empty");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    if (num_classes == 0) num_classes = std::max(2, max_label + 1);
    if (max_label >= num_classes) throw ConfigError("label out of range in " + path.string());
    return {Tensor::matrix(labels.size(), width, std::move(values)), std::move(labels), num_classes};
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    const std::size_t n = data.input_dim();
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.labels[i];
        for (std::size_t j = 0; j < n; ++j) out << ',' << data.features[i * n + j];
        out << '\n';
    }
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "blobs") return SyntheticKind::blobs;
    if (name == "moons") return SyntheticKind::moons;
    throw ConfigError("unknown synthetic dataset kind '" + name + "'");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw InvalidArgument("need at least 2 classes");
    if (spec.dim < 1) throw InvalidArgument("input dimension must be positive");
    if (spec.n < static_cast<std::size_t>(spec.classes) * 10) {
        throw InvalidArgument("need at least 10 samples per class");
    }
    if (spec.noise < 0) throw InvalidArgument("noise must be nonnegative");
    if (spec.kind == SyntheticKind::moons && (spec.dim != 2 || spec.classes != 2)) {
        throw InvalidArgument("moons is defined for 2 features and 2 classes");
    }
    Rng rng(spec.seed);
    const std::size_t n = spec.n, dim = spec.dim;
    const auto d = static_cast<std::size_t>(spec.classes);
    std::vector<double> raw(n * dim);
    std::vector<int> labels(n);

    if (spec.kind == SyntheticKind::blobs) {
        std::vector<double> centers(d * dim);
        for (double& c : centers) c = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = i % d;
            labels[i] = static_cast<int>(k);
            for (std::size_t j = 0; j < dim; ++j) {
                raw[i * dim + j] = centers[k * dim + j] + spec.noise * rng.normal();
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int k = static_cast<int>(i % 2);
            labels[i] = k;
            const double t = std::numbers::pi * rng.uniform();
            double x = k == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double y = k == 0 ? std::sin(t) : 0.5 - std::sin(t);
            raw[i * 2] = x + spec.noise * rng.normal();
            raw[i * 2 + 1] = y + spec.noise * rng.normal();
        }
    }

    // One affine map for all coordinates keeps the geometry isotropic.
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    for (double& v : raw) v = span > 0 ? (v - lo) / span : 0.5;
    return {Tensor::matrix(n, dim, std::move(raw)), std::move(labels), spec.classes};
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidArgument("train fraction must be in (0, 1)");
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    if (cut == 0 || cut == idx.size()) throw InvalidArgument("split leaves an empty part");
    std::vector<std::size_t> a(idx.begin(), idx.begin() + cut), b(idx.begin() + cut, idx.end());
    return {data.subset(a), data.subset(b)};
}

}  // namespace bnnprobe
