// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat binary parameter container: "HSP1" magic, a text manifest of
// (name, shape, byte offset) entries plus "!key value" metadata lines,
// then one contiguous float32 little-endian blob.

#include "hgs/core/nn.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace hgs {

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParamRegistry<T>& reg,
                     const std::map<std::string, std::string>& meta) {
    std::ostringstream manifest;
    for (const auto& [k, v] : meta) manifest << "!" << k << " " << v << "\n";
    int64_t offset = 0;
    for (const auto& [name, t] : reg.entries()) {
        manifest << name << " ";
        const auto& s = t.shape();
        for (size_t d = 0; d < s.size(); ++d) manifest << (d ? "x" : "") << s[d];
        manifest << " " << offset << "\n";
        offset += t.numel() * 4;
    }
    std::string mtext = manifest.str();

    std::ofstream f(path, std::ios::binary);
    check(f.good(), "checkpoint: cannot open ", path.string(), " for writing");
    f.write("HSP1", 4);
    uint32_t mlen = uint32_t(mtext.size());
    f.write(reinterpret_cast<const char*>(&mlen), 4);
    f.write(mtext.data(), std::streamsize(mtext.size()));
    for (const auto& [name, t] : reg.entries()) {
        (void)name;
        for (int64_t i = 0; i < t.numel(); ++i) {
            float v = float(t.ptr()[i]);
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    check(f.good(), "checkpoint: write failed for ", path.string());
}

/// Loads parameters into an existing registry. Every name and shape must
/// match the registry exactly; metadata is returned for config validation.
template <class T>
std::map<std::string, std::string> load_checkpoint(const std::filesystem::path& path,
                                                   ParamRegistry<T>& reg) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "checkpoint: cannot open ", path.string());
    char magic[4];
    f.read(magic, 4);
    check(f.good() && std::string(magic, 4) == "HSP1",
          "checkpoint: bad magic in ", path.string(), " (expected HSP1)");
    uint32_t mlen = 0;
    f.read(reinterpret_cast<char*>(&mlen), 4);
    std::string mtext(mlen, '\0');
    f.read(mtext.data(), mlen);
    check(f.good(), "checkpoint: truncated manifest in ", path.string());

    std::map<std::string, std::string> meta;
    struct Entry {
        std::string name;
        Shape shape;
        int64_t offset;
    };
    std::vector<Entry> entries;
    std::istringstream ms(mtext);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.empty()) continue;
        if (line[0] == '!') {
            auto sp = line.find(' ');
            check(sp != std::string::npos, "checkpoint: bad metadata line: ", line);
            meta[line.substr(1, sp - 1)] = line.substr(sp + 1);
            continue;
        }
        std::istringstream ls(line);
        Entry e;
        std::string shape_str_;
        ls >> e.name >> shape_str_ >> e.offset;
        check(!ls.fail(), "checkpoint: bad manifest line: ", line);
        std::istringstream shs(shape_str_);
        std::string dim;
        while (std::getline(shs, dim, 'x')) e.shape.push_back(std::stoll(dim));
        entries.push_back(std::move(e));
    }

    check(entries.size() == reg.entries().size(), "checkpoint: holds ", entries.size(),
          " tensors but the model has ", reg.entries().size(),
          "; checkpoint/config mismatch");
    int64_t data_start = int64_t(8 + mlen);
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& [name, t] = reg.entries()[i];
        const Entry& e = entries[i];
        check(e.name == name, "checkpoint: tensor #", i, " is '", e.name,
              "' but the model expects '", name, "'; checkpoint/config mismatch");
        check(e.shape == t.shape(), "checkpoint: '", name, "' has shape ", shape_str(e.shape),
              " but the model expects ", shape_str(t.shape()), "; checkpoint/config mismatch");
        f.seekg(data_start + e.offset);
        Tensor<T> dst = t;
        for (int64_t k = 0; k < dst.numel(); ++k) {
            float v;
            f.read(reinterpret_cast<char*>(&v), 4);
            dst.ptr()[k] = T(v);
        }
        check(f.good(), "checkpoint: truncated data for '", name, "'");
    }
    return meta;
}

} // namespace hgs
