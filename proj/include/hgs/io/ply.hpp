// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary little-endian PLY in the community splat vertex layout:
// x,y,z, nx,ny,nz (zeros), f_dc_0..2, f_rest_* (channel-major), opacity
// (logit), scale_0..2 (log), rot_0..3.

#include "hgs/gaussian.hpp"

#include <filesystem>
#include <fstream>

namespace hgs::io {

namespace detail {

inline double logit(double p) {
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return std::log(p / (1.0 - p));
}

} // namespace detail

template <class T>
void export_ply(const GaussianSet<T>& set, const std::filesystem::path& path,
                double opacity_threshold = 0.0) {
    check(!set.stages.empty(), "export_ply: empty set");
    int sh_degree = set.stages[0].sh_degree;
    for (const auto& b : set.stages)
        check(b.sh_degree == sh_degree, "export_ply: mixed SH degrees");
    const int coeffs = sh_coeff_count(sh_degree);
    const int rest = (coeffs - 1) * 3;

    // Count surviving primitives first.
    int64_t count = 0;
    for (const auto& b : set.stages)
        for (int64_t i = 0; i < b.count(); ++i)
            if (double(b.opacities.ptr()[i]) >= opacity_threshold) ++count;

    std::ofstream f(path, std::ios::binary);
    check(f.good(), "export_ply: cannot open ", path.string());
    f << "ply\nformat binary_little_endian 1.0\n";
    f << "element vertex " << count << "\n";
    auto prop = [&](const std::string& name) { f << "property float " << name << "\n"; };
    prop("x");
    prop("y");
    prop("z");
    prop("nx");
    prop("ny");
    prop("nz");
    for (int i = 0; i < 3; ++i) prop(cat("f_dc_", i));
    for (int i = 0; i < rest; ++i) prop(cat("f_rest_", i));
    prop("opacity");
    for (int i = 0; i < 3; ++i) prop(cat("scale_", i));
    for (int i = 0; i < 4; ++i) prop(cat("rot_", i));
    f << "end_header\n";

    auto put = [&](double v) {
        float fv = float(v);
        f.write(reinterpret_cast<const char*>(&fv), 4);
    };
    for (const auto& b : set.stages) {
        const T* pc = b.centers.ptr();
        const T* ps = b.scales.ptr();
        const T* pr = b.rotations.ptr();
        const T* po = b.opacities.ptr();
        const T* psh = b.sh.ptr();
        for (int64_t i = 0; i < b.count(); ++i) {
            if (double(po[i]) < opacity_threshold) continue;
            for (int k = 0; k < 3; ++k) put(double(pc[i * 3 + k]));
            for (int k = 0; k < 3; ++k) put(0.0); // normals unused
            for (int ch = 0; ch < 3; ++ch) put(double(psh[i * coeffs * 3 + ch]));
            for (int ch = 0; ch < 3; ++ch)
                for (int k = 1; k < coeffs; ++k) put(double(psh[i * coeffs * 3 + k * 3 + ch]));
            put(detail::logit(double(po[i])));
            for (int k = 0; k < 3; ++k) put(std::log(std::max(double(ps[i * 3 + k]), 1e-12)));
            for (int k = 0; k < 4; ++k) put(double(pr[i * 4 + k]));
        }
    }
    check(f.good(), "export_ply: write failed for ", path.string());
}

/// Reads a splat PLY back as one stage block (stage tag 0).
inline StageGaussians<float> import_ply(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "import_ply: cannot open ", path.string());
    std::string line;
    std::getline(f, line);
    check(line == "ply", "import_ply: not a PLY file: ", path.string());
    std::getline(f, line);
    check(line == "format binary_little_endian 1.0", "import_ply: unsupported format: ", line);
    int64_t count = -1;
    std::vector<std::string> props;
    while (std::getline(f, line)) {
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "element") {
            std::string what;
            ss >> what >> count;
            check(what == "vertex", "import_ply: unexpected element ", what);
        } else if (word == "property") {
            std::string type, name;
            ss >> type >> name;
            check(type == "float", "import_ply: only float properties supported, got ", type);
            props.push_back(name);
        } else if (word == "comment") {
            continue;
        } else {
            throw Error(cat("import_ply: unexpected header line: ", line));
        }
    }
    check(count >= 0, "import_ply: missing vertex element");
    int rest = 0;
    for (const auto& p : props)
        if (p.rfind("f_rest_", 0) == 0) ++rest;
    int coeffs = rest / 3 + 1;
    int degree = int(std::lround(std::sqrt(double(coeffs)))) - 1;
    check(sh_coeff_count(degree) == coeffs, "import_ply: cannot infer SH degree from ", rest,
          " f_rest properties");
    check(int(props.size()) == 6 + 3 + rest + 1 + 3 + 4,
          "import_ply: unexpected property count ", props.size());

    StageGaussians<float> b;
    b.stage = 0;
    b.sh_degree = degree;
    b.centers = Tensor<float>::zeros({count, 3});
    b.scales = Tensor<float>::zeros({count, 3});
    b.rotations = Tensor<float>::zeros({count, 4});
    b.opacities = Tensor<float>::zeros({count});
    b.sh = Tensor<float>::zeros({count, coeffs * 3});

    std::vector<float> row(props.size());
    for (int64_t i = 0; i < count; ++i) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 4));
        check(f.good(), "import_ply: truncated payload in ", path.string());
        size_t k = 0;
        for (int a = 0; a < 3; ++a) b.centers.storage()[size_t(i * 3 + a)] = row[k++];
        k += 3; // normals
        for (int ch = 0; ch < 3; ++ch) b.sh.storage()[size_t(i * coeffs * 3 + ch)] = row[k++];
        for (int ch = 0; ch < 3; ++ch)
            for (int q = 1; q < coeffs; ++q)
                b.sh.storage()[size_t(i * coeffs * 3 + q * 3 + ch)] = row[k++];
        float op_logit = row[k++];
        b.opacities.storage()[size_t(i)] = float(1.0 / (1.0 + std::exp(-double(op_logit))));
        for (int a = 0; a < 3; ++a)
            b.scales.storage()[size_t(i * 3 + a)] = std::exp(row[k++]);
        for (int a = 0; a < 4; ++a) b.rotations.storage()[size_t(i * 4 + a)] = row[k++];
    }
    return b;
}

} // namespace hgs::io
