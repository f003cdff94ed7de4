// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include "maskhit/featstore/manifest.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "maskhit/error.hpp"

namespace maskhit {

std::string format_label(const SlideLabel& label) {
    if (const auto* s = std::get_if<SurvivalLabel>(&label)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "survival:%.17g:%d", s->time_years, s->event ? 1 : 0);
        return buf;
    }
    return "class:" + std::to_string(std::get<ClassLabel>(label).id);
}

SlideLabel parse_label(const std::string& text) {
    if (text.starts_with("class:")) {
        std::uint32_t id = 0;
        const char* b = text.data() + 6;
        const char* e = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(b, e, id);
        if (ec != std::errc{} || ptr != e) throw DataError("bad class label '" + text + "'");
        return ClassLabel{id};
    }
    if (text.starts_with("survival:")) {
        const auto colon = text.rfind(':');
        if (colon <= 9) throw DataError("bad survival label '" + text + "'");
        SurvivalLabel s;
        try {
            s.time_years = std::stod(text.substr(9, colon - 9));
        } catch (const std::exception&) {
            throw DataError("bad survival time in '" + text + "'");
        }
        const std::string ev = text.substr(colon + 1);
        if (ev != "0" && ev != "1") throw DataError("bad event flag in '" + text + "'");
        s.event = ev == "1";
        return s;
    }
    throw DataError("unknown label '" + text + "'");
}

std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
    std::ostringstream os;
    os << "# slide_id\tsplit\tlabel\n";
    for (const auto& e : entries) os << e.slide_id << '\t' << e.split << '\t' << format_label(e.label) << '\n';
    return os.str();
}

std::vector<ManifestEntry> decode_manifest(const std::string& text) {
    std::vector<ManifestEntry> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError("manifest line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), parse_label(line.substr(t2 + 1))});
    }
    return out;
}

std::vector<ManifestEntry> manifest_for(const FeatureStore& store, const std::vector<std::string>& splits) {
    if (splits.size() != store.size()) throw DataError("manifest: one split per slide required");
    std::vector<ManifestEntry> out;
    for (std::size_t i = 0; i < store.size(); ++i) {
        out.push_back({store.slide(i).slide_id, splits[i], store.slide(i).label});
    }
    return out;
}

}  // namespace maskhit
