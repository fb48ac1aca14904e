#include "gocom/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace gocom {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'O', 'C', 'M'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded chunks.
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, p_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(std::size_t len) {
        need(len);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
        pos_ += len;
        return s;
    }
    void need(std::size_t k) const {
        if (k > n_ - pos_) throw CheckpointError("checkpoint truncated");
    }
    bool at_end() const { return pos_ == n_; }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamSet& params) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    for (const auto& [name, p] : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : p.value.data()) put<double>(out, v);
    }
    put<std::uint32_t>(out, crc_of(out.data(), out.size()));
    return out;
}

ParamSet decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) throw CheckpointError("checkpoint truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    Reader r(bytes.data() + 4, body - 4);
    if (crc_of(bytes.data(), body) != stored) throw CheckpointError("checkpoint CRC mismatch");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }

    ParamSet out;
    while (!r.at_end()) {
        const auto len = r.get<std::uint32_t>();
        std::string name = r.get_string(len);
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0) throw CheckpointError("checkpoint entry '" + name + "' has rank 0");
        Shape shape;
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const auto d = r.get<std::uint32_t>();
            if (d == 0) throw CheckpointError("checkpoint entry '" + name + "' has a zero dimension");
            shape.push_back(d);
            count *= d;
        }
        r.need(count * sizeof(double));
        std::vector<double> values(count);
        for (auto& v : values) v = r.get<double>();
        if (out.contains(name)) throw CheckpointError("checkpoint repeats entry '" + name + "'");
        out.add(name, Tensor(shape, std::move(values)));
    }
    return out;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed: " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

void restore_values(ParamSet& into, const ParamSet& from, const std::string& what) {
    if (into.names() != from.names()) throw CheckpointError(what + ": parameter names do not match the model");
    for (const auto& [name, p] : from) {
        if (into.at(name).value.shape() != p.value.shape()) {
            throw CheckpointError(what + ": shape mismatch for " + name);
        }
    }
    into.assign_values(from);
}

}  // namespace gocom
