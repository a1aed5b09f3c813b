#include "jrlab/csv.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "jrlab/errors.hpp"

namespace jrlab {

std::string csv_double(double v) {
    // shortest decimal form that parses back to the same double
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw LoadError("failed writing '" + path + "'");
}

std::string history_csv(const TrainHistory& history) {
    std::string out;
    out += "# train_size = " + std::to_string(history.train_size) + "\n";
    out += "iteration,loss,reg_value,test_acc,jf_norm,lr\n";
    for (const HistoryRow& r : history.rows)
        out += std::to_string(r.iteration) + "," + csv_double(r.loss) + ","
               + csv_double(r.reg_value) + "," + csv_double(r.test_acc) + ","
               + csv_double(r.jf_norm) + "," + csv_double(r.lr) + "\n";
    return out;
}

std::string curve_csv(const RobustnessCurve& curve) {
    std::string out;
    out += std::string("# attack = ") + attack_name(curve.kind) + "\n";
    out += "# n_test = " + std::to_string(curve.n_test) + "\n";
    out += std::string(curve.value_is_error ? "distance,test_error" : "sigma,accuracy")
           + "\n";
    for (std::size_t i = 0; i < curve.abscissa.size(); ++i)
        out += csv_double(curve.abscissa[i]) + "," + csv_double(curve.value[i]) + "\n";
    return out;
}

std::string sweep_points_csv(const SweepResult& sweep) {
    std::string out;
    out += std::string("# attack = ") + attack_name(sweep.curve.kind) + "\n";
    out += "# median = " + csv_double(sweep.median) + "\n";
    out += "# n_censored = " + std::to_string(sweep.n_censored) + "\n";
    out += "index,distance,censored\n";
    for (const FoolingPoint& p : sweep.points)
        out += std::to_string(p.index) + "," + csv_double(p.distance) + ","
               + (p.censored ? "1" : "0") + "\n";
    return out;
}

namespace {

// FNV-1a over the center pixels: a stable fingerprint for the preamble.
std::uint64_t center_hash(const Tensor& center) {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : center.data) {
        const char* b = reinterpret_cast<const char*>(&v);
        for (std::size_t i = 0; i < sizeof(double); ++i) {
            h ^= static_cast<unsigned char>(b[i]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

}  // namespace

std::string slice_csv(const DecisionSlice& slice) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(center_hash(slice.center)));
    std::string out;
    out += std::string("# center_hash = ") + hash + "\n";
    out += "# basis_seed = " + std::to_string(slice.basis_seed) + "\n";
    out += "# extent = " + csv_double(slice.extent) + "\n";
    out += "# resolution = " + std::to_string(slice.resolution) + "\n";
    out += "# center_class = " + std::to_string(slice.center_class) + "\n";
    out += "# boundary_radius = " + csv_double(slice.boundary_radius) + "\n";
    out += "i,j,du,dv,pred_class,max_prob\n";
    const double step = 2.0 * slice.extent / static_cast<double>(slice.resolution - 1);
    for (std::size_t i = 0; i < slice.resolution; ++i)
        for (std::size_t j = 0; j < slice.resolution; ++j) {
            const double du = -slice.extent + static_cast<double>(i) * step;
            const double dv = -slice.extent + static_cast<double>(j) * step;
            out += std::to_string(i) + "," + std::to_string(j) + "," + csv_double(du) + ","
                   + csv_double(dv) + "," + std::to_string(slice.cell_class[slice.cell(i, j)])
                   + "," + csv_double(slice.cell_max_prob[slice.cell(i, j)]) + "\n";
        }
    return out;
}

}  // namespace jrlab
