#include "iontrap/rng.hpp"

namespace iontrap {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  std::uint64_t s = mix64(seed + kGolden);
  s = mix64(s ^ (stream + 2 * kGolden));
  s = mix64(s ^ (index + 3 * kGolden));
  state_ = s;
}

CounterRng::result_type CounterRng::operator()() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t stream_id(const char* name) noexcept {
  // FNV-1a, then mixed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = name; *p != '\0'; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

}  // namespace iontrap
