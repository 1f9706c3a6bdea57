#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "axleval/errors.hpp"
#include "axleval/types.hpp"

namespace axleval {

/// How to draw a mixed training set from two sources: an exact per-source
/// image quota, and optionally a total object count to steer toward within
/// the given tolerance.
struct CompositionSpec {
  std::map<std::string, std::size_t> per_source_image_quota;
  std::optional<std::int64_t> target_object_count;
  std::int64_t balance_tolerance = 0;
};

namespace detail {

struct SourceSelection {
  // Indices into a canonically (id-)sorted image list, split into the
  // currently selected images and the remaining pool.
  std::vector<std::size_t> selected;
  std::vector<std::size_t> pool;
};

inline std::int64_t object_count(const ImageRecord& rec) {
  return static_cast<std::int64_t>(rec.ground_truth.size());
}

/// Deterministic Fisher-Yates; avoids std::shuffle so the result does not
/// depend on the standard library's distribution implementation.
inline void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t& state) {
  auto next = [&state]() {
    // xorshift64*; plenty for reproducible sampling
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return state * 0x2545F4914F6CDD1DULL;
  };
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Subset-sum table: reachable[i][k] marks the object totals achievable by
/// choosing exactly k of the first i images. Bit s of word s/64 is sum s.
class QuotaSumTable {
 public:
  QuotaSumTable(const std::vector<std::int64_t>& counts, std::size_t quota)
      : counts_(counts), quota_(quota) {
    std::int64_t max_sum = 0;
    for (std::int64_t c : counts) max_sum += c;
    words_ = static_cast<std::size_t>(max_sum / 64 + 1);
    rows_.assign((counts.size() + 1) * (quota + 1), {});
    row(0, 0).assign(words_, 0);
    row(0, 0)[0] = 1;  // zero items, zero sum
    for (std::size_t i = 1; i <= counts.size(); ++i) {
      for (std::size_t k = 0; k <= std::min(i, quota); ++k) {
        std::vector<std::uint64_t> bits(words_, 0);
        if (const auto& skip = row_at(i - 1, k); !skip.empty()) bits = skip;
        if (k > 0) {
          if (const auto& take = row_at(i - 1, k - 1); !take.empty()) {
            or_shifted(bits, take, static_cast<std::size_t>(counts[i - 1]));
          }
        }
        row(i, k) = std::move(bits);
      }
    }
  }

  bool achievable(std::int64_t sum) const {
    if (sum < 0 || static_cast<std::size_t>(sum) >= words_ * 64) return false;
    const auto& bits = rows_[counts_.size() * (quota_ + 1) + quota_];
    if (bits.empty()) return false;
    return (bits[static_cast<std::size_t>(sum) / 64] >> (sum % 64)) & 1;
  }

  std::int64_t max_sum_bound() const { return static_cast<std::int64_t>(words_) * 64 - 1; }

  /// Indices of a concrete selection achieving (quota, sum). Deterministic:
  /// walking items from last to first, an item is skipped whenever possible.
  std::vector<std::size_t> reconstruct(std::int64_t sum) const {
    std::vector<std::size_t> chosen;
    std::size_t k = quota_;
    std::int64_t s = sum;
    for (std::size_t i = counts_.size(); i > 0; --i) {
      if (!row_at(i - 1, k).empty() && test(row_at(i - 1, k), s)) {
        continue;  // skip item i-1
      }
      chosen.push_back(i - 1);
      s -= counts_[i - 1];
      --k;
    }
    std::reverse(chosen.begin(), chosen.end());
    return chosen;
  }

 private:
  std::vector<std::uint64_t>& row(std::size_t i, std::size_t k) {
    return rows_[i * (quota_ + 1) + k];
  }
  const std::vector<std::uint64_t>& row_at(std::size_t i, std::size_t k) const {
    return rows_[i * (quota_ + 1) + k];
  }
  static bool test(const std::vector<std::uint64_t>& bits, std::int64_t s) {
    if (s < 0 || static_cast<std::size_t>(s) >= bits.size() * 64) return false;
    return (bits[static_cast<std::size_t>(s) / 64] >> (s % 64)) & 1;
  }
  void or_shifted(std::vector<std::uint64_t>& dst, const std::vector<std::uint64_t>& src,
                  std::size_t shift) const {
    const std::size_t word_shift = shift / 64;
    const std::size_t bit_shift = shift % 64;
    for (std::size_t w = words_; w-- > 0;) {
      if (w < word_shift) break;
      std::uint64_t value = src[w - word_shift] << bit_shift;
      if (bit_shift != 0 && w > word_shift) {
        value |= src[w - word_shift - 1] >> (64 - bit_shift);
      }
      dst[w] |= value;
    }
  }

  std::vector<std::int64_t> counts_;
  std::size_t quota_;
  std::size_t words_ = 0;
  std::vector<std::vector<std::uint64_t>> rows_;
};

}  // namespace detail

/// Reports the image ids shared between two datasets (empty means disjoint).
inline std::vector<std::string> check_disjoint(const Dataset& train, const Dataset& test) {
  std::set<std::string> train_ids;
  for (const auto& rec : train.images) train_ids.insert(rec.image_id);
  std::vector<std::string> shared;
  for (const auto& rec : test.images) {
    if (train_ids.count(rec.image_id)) shared.push_back(rec.image_id);
  }
  std::sort(shared.begin(), shared.end());
  return shared;
}

/// Draws the mixed dataset: a seeded shuffle fixes an initial selection of
/// exactly the quota from each source, greedy swap passes then trade
/// selected images for pool images of the same source while that closes the
/// gap to target_object_count. If the greedy walk stalls outside the
/// tolerance, an exact subset-sum search takes over, so a within-tolerance
/// selection is found whenever one exists. Fully deterministic given
/// (inputs, seed).
inline Dataset compose_mixed(const Dataset& a, const Dataset& b, const CompositionSpec& spec,
                             std::uint64_t seed) {
  if (a.categories != b.categories) {
    throw ValidationError("compose_mixed: sources disagree on the category table");
  }
  const auto quota_of = [&](const Dataset& d) {
    const auto it = spec.per_source_image_quota.find(d.name);
    if (it == spec.per_source_image_quota.end()) {
      throw ValidationError("compose_mixed: no quota given for source '" + d.name + "'");
    }
    if (it->second == 0) {
      throw ValidationError("compose_mixed: quota for source '" + d.name + "' must be positive");
    }
    if (it->second > d.images.size()) {
      throw ValidationError("compose_mixed: quota " + std::to_string(it->second) +
                            " exceeds the " + std::to_string(d.images.size()) +
                            " images of source '" + d.name + "'");
    }
    return it->second;
  };
  const std::size_t quota_a = quota_of(a);
  const std::size_t quota_b = quota_of(b);
  if (spec.balance_tolerance < 0) {
    throw ValidationError("compose_mixed: balance tolerance must be non-negative");
  }

  // Canonical per-source image order, then the seeded initial draw.
  const Dataset* sources[2] = {&a, &b};
  const std::size_t quotas[2] = {quota_a, quota_b};
  std::vector<std::size_t> order[2];
  detail::SourceSelection sel[2];
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ULL + 0x6A09E667F3BCC909ULL;
  for (int s = 0; s < 2; ++s) {
    const auto& images = sources[s]->images;
    order[s].resize(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) order[s][i] = i;
    std::sort(order[s].begin(), order[s].end(), [&](std::size_t x, std::size_t y) {
      return images[x].image_id < images[y].image_id;
    });
    std::vector<std::size_t> drawn = order[s];
    detail::seeded_shuffle(drawn, state);
    sel[s].selected.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(quotas[s]));
    sel[s].pool.assign(drawn.begin() + static_cast<std::ptrdiff_t>(quotas[s]), drawn.end());
  }

  if (spec.target_object_count) {
    const std::int64_t target = *spec.target_object_count;
    auto achieved = [&]() {
      std::int64_t total = 0;
      for (int s = 0; s < 2; ++s) {
        for (std::size_t idx : sel[s].selected) {
          total += detail::object_count(sources[s]->images[idx]);
        }
      }
      return total;
    };

    std::int64_t current = achieved();
    while (std::llabs(current - target) > spec.balance_tolerance) {
      // Best single swap across both sources; ties go to the
      // lexicographically smallest (outgoing id, incoming id) pair.
      std::int64_t best_gap = std::llabs(current - target);
      int best_source = -1;
      std::size_t best_out = 0, best_in = 0;
      std::string best_out_id, best_in_id;
      for (int s = 0; s < 2; ++s) {
        const auto& images = sources[s]->images;
        for (std::size_t i = 0; i < sel[s].selected.size(); ++i) {
          const std::int64_t out_count = detail::object_count(images[sel[s].selected[i]]);
          const std::string& out_id = images[sel[s].selected[i]].image_id;
          for (std::size_t j = 0; j < sel[s].pool.size(); ++j) {
            const std::int64_t delta =
                detail::object_count(images[sel[s].pool[j]]) - out_count;
            const std::int64_t gap = std::llabs(current + delta - target);
            const std::string& in_id = images[sel[s].pool[j]].image_id;
            const bool better =
                gap < best_gap ||
                (gap == best_gap && best_source >= 0 &&
                 std::tie(out_id, in_id) < std::tie(best_out_id, best_in_id));
            if (better) {
              best_gap = gap;
              best_source = s;
              best_out = i;
              best_in = j;
              best_out_id = out_id;
              best_in_id = in_id;
            }
          }
        }
      }
      if (best_source < 0 || best_gap >= std::llabs(current - target)) break;
      std::swap(sel[best_source].selected[best_out], sel[best_source].pool[best_in]);
      current = achieved();
    }

    if (std::llabs(current - target) > spec.balance_tolerance) {
      // Exact fallback: per-source subset-sum tables over canonical order.
      std::vector<std::int64_t> counts[2];
      for (int s = 0; s < 2; ++s) {
        for (std::size_t idx : order[s]) {
          counts[s].push_back(detail::object_count(sources[s]->images[idx]));
        }
      }
      const detail::QuotaSumTable table_a(counts[0], quotas[0]);
      const detail::QuotaSumTable table_b(counts[1], quotas[1]);
      std::int64_t best_total_gap = std::llabs(current - target);
      std::optional<std::pair<std::int64_t, std::int64_t>> best_split;
      for (std::int64_t sum_a = 0; sum_a <= table_a.max_sum_bound(); ++sum_a) {
        if (!table_a.achievable(sum_a)) continue;
        for (std::int64_t sum_b = 0; sum_b <= table_b.max_sum_bound(); ++sum_b) {
          if (!table_b.achievable(sum_b)) continue;
          const std::int64_t gap = std::llabs(sum_a + sum_b - target);
          if (gap < best_total_gap) {
            best_total_gap = gap;
            best_split = {sum_a, sum_b};
            if (gap == 0) break;
          }
        }
        if (best_total_gap == 0) break;
      }
      if (best_split) {
        const detail::QuotaSumTable* tables[2] = {&table_a, &table_b};
        const std::int64_t sums[2] = {best_split->first, best_split->second};
        for (int s = 0; s < 2; ++s) {
          sel[s].selected.clear();
          for (std::size_t pos : tables[s]->reconstruct(sums[s])) {
            sel[s].selected.push_back(order[s][pos]);
          }
        }
      }
    }
  }

  Dataset out;
  out.name = a.name + "(" + std::to_string(quota_a) + ")+" + b.name + "(" +
             std::to_string(quota_b) + "),seed=" + std::to_string(seed);
  out.categories = a.categories;
  std::set<std::string> seen;
  for (int s = 0; s < 2; ++s) {
    for (std::size_t idx : sel[s].selected) {
      const ImageRecord& rec = sources[s]->images[idx];
      if (!seen.insert(rec.image_id).second) {
        throw ValidationError("compose_mixed: image id '" + rec.image_id +
                              "' appears in both sources");
      }
      out.images.push_back(rec);
    }
  }
  std::sort(out.images.begin(), out.images.end(),
            [](const ImageRecord& x, const ImageRecord& y) { return x.image_id < y.image_id; });
  return out;
}

}  // namespace axleval
