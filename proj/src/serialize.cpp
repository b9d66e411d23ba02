#include "dmnet/serialize.hpp"

#include <cstring>
#include <fstream>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'C', 'K'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64_raw(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw DataError("checkpoint truncated");
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

Archive::Entry& Archive::add(const std::string& name) {
    for (const auto& e : entries_)
        if (e.name == name) throw Error("duplicate archive entry: " + name);
    entries_.emplace_back();
    entries_.back().name = name;
    return entries_.back();
}

void Archive::put_f64(const std::string& name, const Shape& shape, const std::vector<double>& data) {
    if (numel_of(shape) != static_cast<int>(data.size()))
        throw ShapeError("archive entry " + name + ": shape/data mismatch");
    Entry& e = add(name);
    e.kind = 0;
    e.shape = shape;
    e.f64 = data;
}

void Archive::put_i64(const std::string& name, const std::vector<std::int64_t>& data) {
    Entry& e = add(name);
    e.kind = 1;
    e.i64 = data;
}

void Archive::put_text(const std::string& name, const std::string& text) {
    Entry& e = add(name);
    e.kind = 2;
    e.text = text;
}

bool Archive::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const Archive::Entry& Archive::entry(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw DataError("archive entry not found: " + name);
}

const std::vector<double>& Archive::f64(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.kind != 0) throw DataError("archive entry " + name + " is not f64");
    return e.f64;
}

const Shape& Archive::shape_of(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.kind != 0) throw DataError("archive entry " + name + " is not f64");
    return e.shape;
}

const std::vector<std::int64_t>& Archive::i64(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.kind != 1) throw DataError("archive entry " + name + " is not i64");
    return e.i64;
}

const std::string& Archive::text(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.kind != 2) throw DataError("archive entry " + name + " is not text");
    return e.text;
}

std::vector<std::uint8_t> Archive::encode() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u64(out, entries_.size());
    for (const auto& e : entries_) {
        put_u64(out, e.name.size());
        out.insert(out.end(), e.name.begin(), e.name.end());
        out.push_back(e.kind);
        switch (e.kind) {
            case 0:
                put_u64(out, e.shape.size());
                for (int d : e.shape) put_u64(out, static_cast<std::uint64_t>(d));
                put_u64(out, e.f64.size());
                for (double v : e.f64) put_f64_raw(out, v);
                break;
            case 1:
                put_u64(out, e.i64.size());
                for (std::int64_t v : e.i64) put_u64(out, static_cast<std::uint64_t>(v));
                break;
            case 2:
                put_u64(out, e.text.size());
                out.insert(out.end(), e.text.begin(), e.text.end());
                break;
            default:
                throw Error("archive entry " + e.name + ": unknown kind");
        }
    }
    return out;
}

Archive Archive::decode(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("not a checkpoint file");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    Archive a;
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::string name = r.str();
        const std::uint8_t kind = r.u8();
        switch (kind) {
            case 0: {
                const std::uint64_t ndim = r.u64();
                Shape shape(ndim);
                for (auto& d : shape) d = static_cast<int>(r.u64());
                const std::uint64_t cnt = r.u64();
                std::vector<double> data(cnt);
                for (auto& v : data) v = r.f64();
                a.put_f64(name, shape, data);
                break;
            }
            case 1: {
                const std::uint64_t cnt = r.u64();
                std::vector<std::int64_t> data(cnt);
                for (auto& v : data) v = static_cast<std::int64_t>(r.u64());
                a.put_i64(name, data);
                break;
            }
            case 2:
                a.put_text(name, r.str());
                break;
            default:
                throw DataError("checkpoint entry " + name + ": unknown kind");
        }
    }
    if (r.pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
    return a;
}

void Archive::save(const std::string& path) const {
    const auto bytes = encode();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode(bytes);
}

}  // namespace dmnet
