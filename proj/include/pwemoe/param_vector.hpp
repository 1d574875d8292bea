// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat parameter storage with a named-segment layout.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pwemoe {

/// What a layout segment holds. Dense kinds store the augmented matrix [W | b]
/// row-major with shape {out, in + 1}; Raw segments are plain vectors.
enum class SegmentKind { DenseRelu, DenseIdentity, DenseSoftmax, Raw };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view s);
bool is_dense(SegmentKind kind);

struct LayoutEntry {
  std::string name;
  std::vector<std::size_t> shape;
  SegmentKind kind = SegmentKind::Raw;

  std::size_t count() const;
  bool operator==(const LayoutEntry&) const = default;
};

/// Ordered list of uniquely named segments.
class Layout {
 public:
  Layout() = default;
  explicit Layout(std::vector<LayoutEntry> entries);

  const std::vector<LayoutEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total() const { return total_; }
  std::size_t offset(std::size_t index) const { return offsets_[index]; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Index of `name`; throws SelectorError when absent.
  std::size_t index_of(std::string_view name) const;

  /// Sub-layout keeping the named entries in this layout's order.
  Layout subset(std::span<const std::string> names) const;

  bool operator==(const Layout& other) const { return entries_ == other.entries_; }

 private:
  std::vector<LayoutEntry> entries_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

class ParamVector {
 public:
  ParamVector() = default;
  /// Zero-filled vector for `layout`.
  explicit ParamVector(Layout layout);
  /// Throws LayoutError when values.size() != layout.total().
  ParamVector(Layout layout, std::vector<double> values);

  const Layout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::span<const double> segment(std::string_view name) const;
  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::size_t index) const;
  std::span<double> segment(std::size_t index);

  /// Copy restricted to the named layers.
  ParamVector select(std::span<const std::string> names) const;

  bool operator==(const ParamVector& other) const = default;

 private:
  Layout layout_;
  std::vector<double> values_;
};

/// Throws LayoutError naming the first differing entry.
void require_same_layout(const Layout& a, const Layout& b);

/// FNV-1a over the raw bytes of the values; used for bit-identity checks.
std::uint64_t checksum(std::span<const double> values);

}  // namespace pwemoe
