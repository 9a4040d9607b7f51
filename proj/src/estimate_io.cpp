#include "cmtdp/estimate_io.hpp"

#include "cmtdp/errors.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

namespace cmtdp {

namespace {

void write_vector(std::ostream& out, const char* tag, const Vector& v) {
    out << tag << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << ' ' << v[i];
    }
    out << '\n';
}

void write_kernel(std::ostream& out, const KernelEstimate& est) {
    out << "family kernel\n";
    out << "dim " << est.anchors.cols() << '\n';
    out << "gamma " << est.gamma << '\n';
    out << "ridge " << est.ridge << '\n';
    out << "rkhs_norm_sq " << est.rkhs_norm_sq << '\n';
    out << "anchors " << est.anchors.rows() << '\n';
    for (Eigen::Index i = 0; i < est.anchors.rows(); ++i) {
        for (Eigen::Index j = 0; j < est.anchors.cols(); ++j) {
            out << (j == 0 ? "" : " ") << est.anchors(i, j);
        }
        out << '\n';
    }
    write_vector(out, "alpha", est.alpha);
    if (est.base) {
        out << "base begin\n";
        write_kernel(out, *est.base);
        out << "base end\n";
    } else {
        out << "base none\n";
    }
}

void expect(std::istream& in, const std::string& word) {
    std::string token;
    if (!(in >> token) || token != word) {
        throw InvalidInput("estimate dump: expected '" + word + "', got '" + token + "'");
    }
}

template <typename T>
T read_value(std::istream& in, const std::string& tag) {
    expect(in, tag);
    T value{};
    if (!(in >> value)) {
        throw InvalidInput("estimate dump: bad value after '" + tag + "'");
    }
    return value;
}

Vector read_vector(std::istream& in, const std::string& tag) {
    const auto size = read_value<Eigen::Index>(in, tag);
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        if (!(in >> v[i])) {
            throw InvalidInput("estimate dump: truncated '" + tag + "' array");
        }
    }
    return v;
}

KernelEstimate read_kernel_body(std::istream& in) {
    KernelEstimate est;
    const auto dim = read_value<Eigen::Index>(in, "dim");
    est.gamma = read_value<double>(in, "gamma");
    est.ridge = read_value<double>(in, "ridge");
    est.rkhs_norm_sq = read_value<double>(in, "rkhs_norm_sq");
    const auto rows = read_value<Eigen::Index>(in, "anchors");
    est.anchors.resize(rows, dim);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (!(in >> est.anchors(i, j))) {
                throw InvalidInput("estimate dump: truncated anchors");
            }
        }
    }
    est.alpha = read_vector(in, "alpha");
    expect(in, "base");
    std::string mode;
    in >> mode;
    if (mode == "begin") {
        expect(in, "family");
        expect(in, "kernel");
        est.base = std::make_shared<const KernelEstimate>(read_kernel_body(in));
        expect(in, "base");
        expect(in, "end");
    } else if (mode != "none") {
        throw InvalidInput("estimate dump: bad base marker '" + mode + "'");
    }
    est.diagnostics.converged = true;
    return est;
}

}  // namespace

void write_estimate(std::ostream& out, const Estimate& est) {
    const auto old_precision = out.precision(17);
    out << "cmtdp-estimate 1\n";
    if (const auto* lin = std::get_if<LinearEstimate>(&est)) {
        out << "family linear\n";
        out << "dim " << lin->coef.size() << '\n';
        write_vector(out, "coef", lin->coef);
        if (lin->base) {
            write_vector(out, "base", *lin->base);
        } else {
            out << "base none\n";
        }
        out << "l1_penalty " << lin->l1_penalty << '\n';
    } else {
        write_kernel(out, std::get<KernelEstimate>(est));
    }
    out << "end\n";
    out.precision(old_precision);
}

Estimate read_estimate(std::istream& in) {
    if (read_value<int>(in, "cmtdp-estimate") != 1) {
        throw InvalidInput("estimate dump: unsupported version");
    }
    expect(in, "family");
    std::string family;
    in >> family;
    Estimate result;
    if (family == "linear") {
        LinearEstimate lin;
        const auto dim = read_value<Eigen::Index>(in, "dim");
        lin.coef = read_vector(in, "coef");
        expect(in, "base");
        std::string token;
        in >> token;
        if (token != "none") {
            const auto size = static_cast<Eigen::Index>(std::stol(token));
            Vector base(size);
            for (Eigen::Index i = 0; i < size; ++i) {
                in >> base[i];
            }
            lin.base = base;
        }
        lin.l1_penalty = read_value<double>(in, "l1_penalty");
        if (lin.coef.size() != dim || (lin.base && lin.base->size() != dim) || !in) {
            throw InvalidInput("estimate dump: inconsistent linear dimensions");
        }
        lin.diagnostics.converged = true;
        result = std::move(lin);
    } else if (family == "kernel") {
        result = read_kernel_body(in);
    } else {
        throw InvalidInput("estimate dump: unknown family '" + family + "'");
    }
    expect(in, "end");
    return result;
}

}  // namespace cmtdp
