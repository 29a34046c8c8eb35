#pragma once

// Integer money units and exact mixed-unit arithmetic. No ledger value is ever
// held in floating point; conversions go through 128-bit intermediates.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace satsrail {

using cents_t = std::int64_t;
using msat_t = std::int64_t;
using sats_t = std::int64_t;

inline constexpr std::int64_t kSatsPerBtc = 100'000'000;
inline constexpr std::int64_t kMsatPerSat = 1'000;
inline constexpr std::int64_t kMsatPerBtc = kSatsPerBtc * kMsatPerSat;
inline constexpr std::int64_t kBpsDenominator = 10'000;
inline constexpr std::int64_t kPpmDenominator = 1'000'000;

// floor(a * b / d) for non-negative a, b and positive d.
std::int64_t mul_div_floor(std::int64_t a, std::int64_t b, std::int64_t d);
// ceil(a * b / d) for non-negative a, b and positive d.
std::int64_t mul_div_ceil(std::int64_t a, std::int64_t b, std::int64_t d);

// Value of msat at a cents-per-BTC price, rounded down to whole cents.
cents_t msat_to_cents_floor(msat_t amount, cents_t price_cents_per_btc);
cents_t msat_to_cents_ceil(msat_t amount, cents_t price_cents_per_btc);
// msat purchasable with `cents` at the given price, rounded down.
msat_t cents_to_msat_floor(cents_t amount, cents_t price_cents_per_btc);

// Parses a non-negative decimal USD amount ("77395000000", "999.99") into
// cents. Digits past the second decimal are rounded half-up.
cents_t parse_usd_cents(std::string_view text);

// Renders cents as a plain decimal dollar string, e.g. -12345 -> "-123.45".
std::string format_cents(cents_t cents);

// Largest-remainder apportionment of `total` across integer `weights`. Ties in
// the remainder go to the lower index, so callers control tie-break order by
// how they sort the weights. The result always sums to `total`.
std::vector<std::int64_t> apportion_largest_remainder(std::int64_t total,
                                                      std::span<const std::uint64_t> weights);

}  // namespace satsrail
