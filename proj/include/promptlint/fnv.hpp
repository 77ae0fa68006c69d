#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace promptlint {

/// Incremental FNV-1a 64-bit hasher. Stable across platforms; used for
/// structural hashes, content hashes, and replay request digests. The
/// algorithm name is part of every on-disk format version string.
class fnv1a64 {
  public:
    static constexpr std::uint64_t offset_basis = 14695981039346656037ull;
    static constexpr std::uint64_t prime = 1099511628211ull;

    fnv1a64& update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ = (state_ ^ c) * prime;
        }
        return *this;
    }

    fnv1a64& update_byte(std::uint8_t b) {
        state_ = (state_ ^ b) * prime;
        return *this;
    }

    /// Little-endian, fixed width, so digests agree across machines.
    fnv1a64& update_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            update_byte(static_cast<std::uint8_t>(v >> (8 * i)));
        }
        return *this;
    }

    /// Length-prefixed string, so adjacent fields cannot alias.
    fnv1a64& update_sized(std::string_view bytes) {
        update_u64(bytes.size());
        return update(bytes);
    }

    std::uint64_t digest() const { return state_; }

  private:
    std::uint64_t state_ = offset_basis;
};

std::string to_hex(std::uint64_t digest);
std::uint64_t from_hex(std::string_view hex);

}  // namespace promptlint
