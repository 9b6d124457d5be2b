#pragma once

#include <cstdint>
#include <initializer_list>

namespace qfi::rng {

// splitmix64 finalizer; used both as a mixer for key derivation and as the
// engine behind Stream.
std::uint64_t mix64(std::uint64_t x);

// Small counter-based generator. Every consumer derives its own Stream from
// (master seed, path of indices), so record generation can be farmed out to
// any number of threads and still produce bit-identical output.
class Stream {
  public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64();
    double uniform();             // [0, 1), 53-bit mantissa
    double normal();              // standard normal, Box-Muller
    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n);

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Deterministic key derivation: hash-chain the path elements into the seed.
std::uint64_t derive_key(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Stream derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Stream(derive_key(master, path));
}

}  // namespace qfi::rng
