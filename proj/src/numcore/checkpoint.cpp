// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/numcore/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "maskhit/numcore/binary_io.hpp"

namespace maskhit {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing '" + path + "'");
}

namespace {

constexpr std::string_view kMagic = "MHCK";

void write_section(ByteWriter& w, const ParamMap& entries) {
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) w.u64(e);
        for (double v : t.values()) w.f32(static_cast<float>(v));
    }
}

ParamMap read_section(ByteReader& r) {
    ParamMap out;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw DataError("checkpoint entry '" + name + "' has invalid rank");
        Shape shape(rank);
        std::uint64_t total = 1;
        for (auto& e : shape) {
            e = r.u64();
            if (e == 0) throw DataError("checkpoint entry '" + name + "' has a zero extent");
            total *= e;
        }
        if (total > r.remaining() / 4) throw DataError("truncated checkpoint: entry '" + name + "' values");
        std::vector<double> values(total);
        for (auto& v : values) v = static_cast<double>(r.f32());
        if (!out.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
            throw DataError("duplicate checkpoint entry '" + name + "'");
        }
    }
    return out;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    ByteWriter w;
    w.bytes(kMagic);
    w.u32(kCheckpointVersion);
    write_section(w, ckpt.params);
    write_section(w, ckpt.optimizer);
    return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes, "checkpoint");
    if (r.bytes(kMagic.size()) != kMagic) throw DataError("bad checkpoint magic (expected MHCK)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint version mismatch: file " + std::to_string(version) + ", supported " +
                        std::to_string(kCheckpointVersion));
    }
    Checkpoint ckpt;
    ckpt.params = read_section(r);
    ckpt.optimizer = read_section(r);
    if (r.remaining() != 0) throw DataError("trailing bytes after checkpoint");
    return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace maskhit
