#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmnet/tensor.hpp"

namespace dmnet {

// Versioned binary container for checkpoints: named f64 arrays (weights,
// memory), i64 arrays (flags, counters) and text blobs (config snapshot).
// Encoding is explicit little-endian with no timestamps, so save/load/save
// round-trips are byte-identical.
class Archive {
public:
    static constexpr std::uint32_t kVersion = 1;

    struct Entry {
        std::string name;
        std::uint8_t kind = 0;  // 0 = f64, 1 = i64, 2 = text
        Shape shape;            // f64 only
        std::vector<double> f64;
        std::vector<std::int64_t> i64;
        std::string text;
    };

    void put_f64(const std::string& name, const Shape& shape, const std::vector<double>& data);
    void put_i64(const std::string& name, const std::vector<std::int64_t>& data);
    void put_text(const std::string& name, const std::string& text);

    bool has(const std::string& name) const;
    const Entry& entry(const std::string& name) const;
    const std::vector<Entry>& entries() const { return entries_; }

    const std::vector<double>& f64(const std::string& name) const;
    const Shape& shape_of(const std::string& name) const;
    const std::vector<std::int64_t>& i64(const std::string& name) const;
    const std::string& text(const std::string& name) const;

    std::vector<std::uint8_t> encode() const;
    static Archive decode(const std::vector<std::uint8_t>& bytes);

    void save(const std::string& path) const;
    static Archive load(const std::string& path);

private:
    Entry& add(const std::string& name);
    std::vector<Entry> entries_;
};

}  // namespace dmnet
