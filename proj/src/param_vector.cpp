// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/param_vector.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>
#include <set>

#include "pwemoe/error.hpp"

namespace pwemoe {

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::DenseRelu: return "dense-relu";
    case SegmentKind::DenseIdentity: return "dense-identity";
    case SegmentKind::DenseSoftmax: return "dense-softmax";
    case SegmentKind::Raw: return "raw";
  }
  return "raw";
}

SegmentKind segment_kind_from_string(std::string_view s) {
  if (s == "dense-relu") return SegmentKind::DenseRelu;
  if (s == "dense-identity") return SegmentKind::DenseIdentity;
  if (s == "dense-softmax") return SegmentKind::DenseSoftmax;
  if (s == "raw") return SegmentKind::Raw;
  throw LayoutError("unknown segment kind '" + std::string(s) + "'");
}

bool is_dense(SegmentKind kind) { return kind != SegmentKind::Raw; }

std::size_t LayoutEntry::count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Layout::Layout(std::vector<LayoutEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string_view> seen;
  offsets_.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!seen.insert(e.name).second) throw LayoutError("duplicate layer name '" + e.name + "'");
    if (e.shape.empty()) throw LayoutError("layer '" + e.name + "' has an empty shape");
    if (is_dense(e.kind) && (e.shape.size() != 2 || e.shape[1] < 2))
      throw LayoutError("dense layer '" + e.name + "' needs shape {out, in + 1}");
    offsets_.push_back(total_);
    total_ += e.count();
  }
}

std::optional<std::size_t> Layout::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

std::size_t Layout::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SelectorError("unknown layer '" + std::string(name) + "'");
}

Layout Layout::subset(std::span<const std::string> names) const {
  std::set<std::string_view> wanted;
  for (const auto& n : names) {
    index_of(n);
    wanted.insert(n);
  }
  std::vector<LayoutEntry> kept;
  for (const auto& e : entries_)
    if (wanted.contains(e.name)) kept.push_back(e);
  return Layout(std::move(kept));
}

ParamVector::ParamVector(Layout layout) : layout_(std::move(layout)), values_(layout_.total(), 0.0) {}

ParamVector::ParamVector(Layout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_.total())
    throw LayoutError("parameter count " + std::to_string(values_.size()) +
                      " does not match layout total " + std::to_string(layout_.total()));
}

std::span<const double> ParamVector::segment(std::string_view name) const {
  return segment(layout_.index_of(name));
}
std::span<double> ParamVector::segment(std::string_view name) {
  return segment(layout_.index_of(name));
}
std::span<const double> ParamVector::segment(std::size_t index) const {
  return std::span<const double>(values_).subspan(layout_.offset(index),
                                                  layout_.entries()[index].count());
}
std::span<double> ParamVector::segment(std::size_t index) {
  return std::span<double>(values_).subspan(layout_.offset(index), layout_.entries()[index].count());
}

ParamVector ParamVector::select(std::span<const std::string> names) const {
  ParamVector out(layout_.subset(names));
  for (std::size_t i = 0; i < out.layout().size(); ++i) {
    auto src = segment(out.layout().entries()[i].name);
    std::copy(src.begin(), src.end(), out.segment(i).begin());
  }
  return out;
}

void require_same_layout(const Layout& a, const Layout& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a.entries()[i] == b.entries()[i]))
      throw LayoutError("layout mismatch at layer '" + a.entries()[i].name + "'");
  }
  if (a.size() != b.size()) {
    const auto& longer = a.size() > b.size() ? a : b;
    throw LayoutError("layout mismatch at layer '" + longer.entries()[n].name + "'");
  }
}

std::uint64_t checksum(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace pwemoe
