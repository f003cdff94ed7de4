// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "maskhit/featstore/store.hpp"

namespace maskhit {

// Manifest layout: tab-separated text, one slide per line after the header
//   slide_id <TAB> split <TAB> label
// where label is "survival:<time_years>:<event 0|1>" or "class:<id>".
// Lines starting with '#' are comments.

struct ManifestEntry {
    std::string slide_id;
    std::string split;
    SlideLabel label;
};

std::string format_label(const SlideLabel& label);
SlideLabel parse_label(const std::string& text);

std::string encode_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> decode_manifest(const std::string& text);

/// One entry per slide of the store, splits given in slide order.
std::vector<ManifestEntry> manifest_for(const FeatureStore& store, const std::vector<std::string>& splits);

}  // namespace maskhit
