#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffss {

// Exit-code-mapped error categories. Config errors abort before any work,
// backend errors mean an external service misbehaved, quality-gate errors
// mean a run finished but violated a threshold.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct QualityGateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG wrapper. mt19937_64 raw output is fully specified by the
// standard; the scaling helpers are pinned here because the <random>
// distributions are implementation-defined and would break byte-stable
// artifacts across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n). Modulo bias is below 1e-18 for any n used here.
    std::uint64_t next_below(std::uint64_t n) { return eng_() % n; }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform in [-1, 1).
    double next_signed() { return next_double() * 2.0 - 1.0; }

    // Fisher-Yates; std::shuffle's draw sequence is implementation-defined.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

// Stable seed derivation for per-item substreams (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t mix_seed(std::uint64_t seed, const std::string& stream);

std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Writes via a temp file in the same directory followed by rename, so a
// concurrent re-run never observes a torn artifact.
void atomic_write(const std::filesystem::path& path, const std::string& content);
void atomic_write(const std::filesystem::path& path, const std::vector<std::uint8_t>& content);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

// JSONL = one JSON document per line; blank lines are skipped.
std::vector<std::string> read_jsonl_lines(const std::filesystem::path& path);

}  // namespace diffss
