// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/attnviz/attnviz.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "maskhit/error.hpp"
#include "maskhit/numcore/binary_io.hpp"
#include "maskhit/numcore/graph.hpp"

namespace maskhit {

Tensor head_average(const Tensor& layer) {
    if (layer.rank() != 3 || layer.dim(1) != layer.dim(2)) {
        throw ShapeError("attention layer must be H x S x S, got " + shape_str(layer.shape()));
    }
    const std::size_t h = layer.dim(0), s = layer.dim(1);
    Tensor out({s, s});
    for (std::size_t k = 0; k < h; ++k) {
        const double* src = layer.data() + k * s * s;
        for (std::size_t i = 0; i < s * s; ++i) out[i] += src[i];
    }
    for (double& v : out.values()) v /= static_cast<double>(h);
    return out;
}

Tensor rollout(std::span<const Tensor> layers, const RolloutOptions& options) {
    if (layers.empty()) throw ShapeError("rollout needs at least one layer");
    std::vector<Tensor> avg;
    for (const Tensor& l : layers) {
        Tensor a = head_average(l);
        if (!avg.empty() && a.shape() != avg.front().shape()) throw ShapeError("rollout layers differ in shape");
        if (options.residual) {
            const std::size_t s = a.rows();
            for (double& v : a.values()) v *= 0.5;
            for (std::size_t i = 0; i < s; ++i) a.at(i, i) += 0.5;
        }
        avg.push_back(std::move(a));
    }
    Tensor result = avg.front();
    for (std::size_t l = 1; l < avg.size(); ++l) {
        result = options.order == RolloutOrder::kLaterLeft ? matmul(avg[l], result) : matmul(result, avg[l]);
    }
    return result;
}

double Heatmap::min() const {
    double m = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (present[i] && (std::isnan(m) || values[i] < m)) m = values[i];
    }
    return m;
}

double Heatmap::max() const {
    double m = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (present[i] && (std::isnan(m) || values[i] > m)) m = values[i];
    }
    return m;
}

Heatmap class_attention_map(const Tensor& rollout_matrix, std::span<const std::uint8_t> background,
                            std::size_t side, std::size_t query) {
    const std::size_t cells = side * side;
    if (rollout_matrix.rank() != 2 || rollout_matrix.rows() != cells + 1 || rollout_matrix.cols() != cells + 1) {
        throw ShapeError("rollout matrix must be (1 + n^2) x (1 + n^2)");
    }
    if (background.size() != cells) throw ShapeError("background flags must cover n^2 cells");
    if (query > cells) throw ShapeError("query row out of range");
    Heatmap map{side, std::vector<double>(cells, 0.0), std::vector<std::uint8_t>(cells, 0)};
    for (std::size_t j = 0; j < cells; ++j) {
        if (background[j]) continue;
        map.present[j] = 1;
        map.values[j] = rollout_matrix.at(query, j + 1);
    }
    return map;
}

Heatmap diff_map(const Heatmap& finetuned, const Heatmap& pretrained) {
    if (finetuned.side != pretrained.side || finetuned.present != pretrained.present) {
        throw ShapeError("diff_map: heatmaps differ in geometry or absent cells");
    }
    Heatmap out = finetuned;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = out.present[i] ? finetuned.values[i] - pretrained.values[i] : 0.0;
    }
    return out;
}

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string encode_pgm(const Heatmap& map) {
    const double lo = map.min(), hi = map.max();
    std::string out = "P5\n" + std::to_string(map.side) + " " + std::to_string(map.side) + "\n255\n";
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (!map.present[i]) {
            out.push_back('\0');
            continue;
        }
        if (!std::isfinite(map.values[i])) throw DataError("heatmap has a non-finite present cell");
        const double norm = hi > lo ? (map.values[i] - lo) / (hi - lo) : 1.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * norm))));
    }
    return out;
}

std::string pgm_sidecar(const Heatmap& map) { return "min=" + g17(map.min()) + " max=" + g17(map.max()) + "\n"; }

std::string encode_heatmap_text(const Heatmap& map) {
    std::ostringstream os;
    os << "# n=" << map.side << " absent=NA min=" << g17(map.min()) << " max=" << g17(map.max()) << '\n';
    for (std::size_t y = 0; y < map.side; ++y) {
        for (std::size_t x = 0; x < map.side; ++x) {
            const std::size_t i = y * map.side + x;
            if (x) os << '\t';
            os << (map.present[i] ? g17(map.values[i]) : "NA");
        }
        os << '\n';
    }
    return os.str();
}

Heatmap decode_heatmap_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || !line.starts_with("# n=")) throw DataError("heatmap text: missing header");
    Heatmap map;
    map.side = std::strtoul(line.c_str() + 4, nullptr, 10);
    if (map.side == 0) throw DataError("heatmap text: bad side in header");
    for (std::size_t y = 0; y < map.side; ++y) {
        if (!std::getline(is, line)) throw DataError("heatmap text: truncated at row " + std::to_string(y));
        std::istringstream row(line);
        std::string cell;
        std::size_t x = 0;
        while (std::getline(row, cell, '\t')) {
            if (cell == "NA") {
                map.values.push_back(0.0);
                map.present.push_back(0);
            } else {
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (end == cell.c_str() || *end != '\0') throw DataError("heatmap text: bad value '" + cell + "'");
                map.values.push_back(v);
                map.present.push_back(1);
            }
            ++x;
        }
        if (x != map.side) throw DataError("heatmap text: row " + std::to_string(y) + " has wrong width");
    }
    return map;
}

void export_heatmap(const Heatmap& map, const std::string& path, HeatmapFormat format) {
    if (format == HeatmapFormat::kPgm) {
        write_file_bytes(path, encode_pgm(map));
        write_file_bytes(path + ".bounds", pgm_sidecar(map));
    } else {
        write_file_bytes(path, encode_heatmap_text(map));
    }
}

}  // namespace maskhit
