#include "satsrail/money.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>

#include "satsrail/error.hpp"

namespace satsrail {

namespace {

using i128 = __int128;

std::int64_t checked_narrow(i128 v) {
  if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min()) {
    throw ValidationError("integer money overflow");
  }
  return static_cast<std::int64_t>(v);
}

}  // namespace

std::int64_t mul_div_floor(std::int64_t a, std::int64_t b, std::int64_t d) {
  if (a < 0 || b < 0 || d <= 0) throw ValidationError("mul_div_floor: negative operand or non-positive divisor");
  return checked_narrow(static_cast<i128>(a) * b / d);
}

std::int64_t mul_div_ceil(std::int64_t a, std::int64_t b, std::int64_t d) {
  if (a < 0 || b < 0 || d <= 0) throw ValidationError("mul_div_ceil: negative operand or non-positive divisor");
  const i128 p = static_cast<i128>(a) * b;
  return checked_narrow((p + d - 1) / d);
}

cents_t msat_to_cents_floor(msat_t amount, cents_t price_cents_per_btc) {
  return mul_div_floor(amount, price_cents_per_btc, kMsatPerBtc);
}

cents_t msat_to_cents_ceil(msat_t amount, cents_t price_cents_per_btc) {
  return mul_div_ceil(amount, price_cents_per_btc, kMsatPerBtc);
}

msat_t cents_to_msat_floor(cents_t amount, cents_t price_cents_per_btc) {
  return mul_div_floor(amount, kMsatPerBtc, price_cents_per_btc);
}

cents_t parse_usd_cents(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw ValidationError("empty amount");

  i128 whole = 0;
  std::size_t i = 0;
  bool any_digit = false;
  for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
    whole = whole * 10 + (text[i] - '0');
    any_digit = true;
    if (whole > std::numeric_limits<std::int64_t>::max() / 100) throw ValidationError("amount too large");
  }
  i128 frac = 0;
  int frac_digits = 0;
  bool round_up = false;
  if (i < text.size() && text[i] == '.') {
    ++i;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      any_digit = true;
      if (frac_digits < 2) {
        frac = frac * 10 + (text[i] - '0');
        ++frac_digits;
      } else if (frac_digits == 2) {
        round_up = text[i] >= '5';
        ++frac_digits;
      }
    }
  }
  if (i != text.size() || !any_digit) throw ValidationError("not a decimal amount: '" + std::string(text) + "'");
  while (frac_digits < 2) {
    frac *= 10;
    ++frac_digits;
  }
  return checked_narrow(whole * 100 + frac + (round_up ? 1 : 0));
}

std::string format_cents(cents_t cents) {
  const bool negative = cents < 0;
  // Avoid overflow on INT64_MIN by working in 128 bits.
  const i128 mag = negative ? -static_cast<i128>(cents) : static_cast<i128>(cents);
  const auto whole = static_cast<std::uint64_t>(mag / 100);
  const auto frac = static_cast<int>(mag % 100);
  std::string out = negative ? "-" : "";
  out += std::to_string(whole);
  out += '.';
  out += static_cast<char>('0' + frac / 10);
  out += static_cast<char>('0' + frac % 10);
  return out;
}

std::vector<std::int64_t> apportion_largest_remainder(std::int64_t total,
                                                      std::span<const std::uint64_t> weights) {
  if (total < 0) throw ValidationError("apportion: negative total");
  if (weights.empty()) throw ValidationError("apportion: no weights");
  i128 weight_sum = 0;
  for (auto w : weights) {
    if (w == 0) throw ValidationError("apportion: weights must be positive");
    weight_sum += w;
  }

  std::vector<std::int64_t> shares(weights.size());
  std::vector<i128> remainders(weights.size());
  i128 assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const i128 num = static_cast<i128>(total) * weights[i];
    shares[i] = static_cast<std::int64_t>(num / weight_sum);
    remainders[i] = num % weight_sum;
    assigned += shares[i];
  }

  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return remainders[l] > remainders[r]; });
  auto leftover = static_cast<std::size_t>(total - assigned);
  for (std::size_t k = 0; k < leftover; ++k) ++shares[order[k]];
  return shares;
}

}  // namespace satsrail
