#include "bnnprobe/jacobian.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bnnprobe/error.hpp"
#include "bnnprobe/svd.hpp"

namespace bnnprobe {

Tensor input_output_jacobian(const Network& net, const Tensor& x) {
    const std::size_t n = net.input_dim(), d = net.output_dim();
    if (x.size() != n) throw ShapeError("input length does not match network");
    Tape tape;
    Var xv = tape.leaf(x.reshaped({1, n}));
    Var z = net.forward(tape, xv);
    const std::vector<Var> leaves{xv};
    std::vector<double> jac(d * n);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> seed(d, 0.0);
        seed[j] = 1.0;
        const Tensor g = vjp(z, Tensor::matrix(1, d, std::move(seed)), leaves).front();
        std::copy(g.begin(), g.end(), jac.begin() + j * n);
    }
    return Tensor::matrix(d, n, std::move(jac));
}

JsvReport jsv_from_jacobians(const std::vector<Tensor>& jacobians, double scale) {
    if (jacobians.empty()) throw InvalidArgument("no samples for singular-value statistics");
    JsvReport r;
    r.scale = scale;
    r.samples = jacobians.size();
    double total = 0.0;
    std::size_t count = 0;
    for (const Tensor& j : jacobians) {
        r.singular_values.push_back(singular_values(scale == 1.0 ? j : bnnprobe::scale(j, scale)));
        for (double s : r.singular_values.back()) {
            total += s;
            ++count;
        }
    }
    r.mean = total / static_cast<double>(count);
    double var = 0.0;
    for (const auto& sv : r.singular_values)
        for (double s : sv) var += (s - r.mean) * (s - r.mean);
    r.stddev = std::sqrt(var / static_cast<double>(count));
    return r;
}

JsvReport jsv_stats(const Network& net, const std::vector<Tensor>& samples,
                    const std::optional<TemperatureScale>& ts) {
    if (ts) ts->validate();
    std::vector<Tensor> jac;
    jac.reserve(samples.size());
    for (const Tensor& x : samples) jac.push_back(input_output_jacobian(net, x));
    return jsv_from_jacobians(jac, ts ? ts->beta : 1.0);
}

TemperatureScale njs_beta_from_jacobians(const std::vector<Tensor>& jacobians) {
    const JsvReport r = jsv_from_jacobians(jacobians);
    if (!(r.mean > 0.0)) throw InvalidArgument("all calibration Jacobians are zero");
    TemperatureScale ts;
    ts.beta = 1.0 / r.mean;
    ts.source = BetaSource::njs;
    return ts;
}

TemperatureScale njs_beta(const Network& net, const std::vector<Tensor>& calibration) {
    std::vector<Tensor> jac;
    jac.reserve(calibration.size());
    for (const Tensor& x : calibration) jac.push_back(input_output_jacobian(net, x));
    return njs_beta_from_jacobians(jac);
}

bool check_jsv_band(JsvReport& report, double lo, double hi) {
    if (report.mean >= lo && report.mean <= hi) return true;
    std::ostringstream os;
    os << "mean singular value " << report.mean << " outside [" << lo << ", " << hi << "]";
    report.warnings.push_back(os.str());
    return false;
}

void JsvReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "sample_id,j,singular_value\n";
    for (std::size_t i = 0; i < singular_values.size(); ++i)
        for (std::size_t j = 0; j < singular_values[i].size(); ++j)
            out << i << ',' << j << ',' << singular_values[i][j] << '\n';
    out << "summary,mean," << mean << '\n';
    out << "summary,std," << stddev << '\n';
}

}  // namespace bnnprobe
