#include "wmc/checkpoint.hpp"

#include <fstream>

namespace wmc {

namespace {

constexpr char kMagic[8] = {'W', 'M', 'C', 'C', 'K', 'P', 'T', '1'};

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    check(static_cast<bool>(is), "checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const uint64_t n = read_pod<uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    check(static_cast<bool>(is), "checkpoint: truncated string");
    return s;
}

}  // namespace

void Checkpoint::add_raw(CheckpointArray a) {
    check(!contains(a.name), "checkpoint: duplicate array " + a.name);
    arrays_.push_back(std::move(a));
}

bool Checkpoint::contains(const std::string& name) const {
    for (const auto& a : arrays_) {
        if (a.name == name) {
            return true;
        }
    }
    return false;
}

const CheckpointArray& Checkpoint::at(const std::string& name) const {
    for (const auto& a : arrays_) {
        if (a.name == name) {
            return a;
        }
    }
    fail("checkpoint: missing array " + name);
}

void Checkpoint::add_scalar_i64(const std::string& name, int64_t v) {
    CheckpointArray a;
    a.name = name;
    a.dtype = ArrayDType::i64;
    a.shape = {1};
    a.bytes.resize(sizeof(int64_t));
    std::memcpy(a.bytes.data(), &v, sizeof(int64_t));
    add_raw(std::move(a));
}

int64_t Checkpoint::get_scalar_i64(const std::string& name) const {
    const CheckpointArray& a = at(name);
    check(a.dtype == ArrayDType::i64 && a.bytes.size() == sizeof(int64_t),
          "checkpoint: not an i64 scalar: " + name);
    int64_t v = 0;
    std::memcpy(&v, a.bytes.data(), sizeof(int64_t));
    return v;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    check(static_cast<bool>(os), "checkpoint: cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, version);
    write_string(os, config_text);
    write_pod<uint32_t>(os, static_cast<uint32_t>(arrays_.size()));
    for (const auto& a : arrays_) {
        write_string(os, a.name);
        write_pod<uint8_t>(os, static_cast<uint8_t>(a.dtype));
        write_pod<uint32_t>(os, static_cast<uint32_t>(a.shape.size()));
        for (int64_t d : a.shape) {
            write_pod<int64_t>(os, d);
        }
        write_pod<uint64_t>(os, a.bytes.size());
        os.write(reinterpret_cast<const char*>(a.bytes.data()),
                 static_cast<std::streamsize>(a.bytes.size()));
    }
    check(static_cast<bool>(os), "checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(static_cast<bool>(is), "checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    check(static_cast<bool>(is) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "checkpoint: bad magic in " + path);
    Checkpoint ck;
    ck.version = read_pod<uint32_t>(is);
    check(ck.version == 1, "checkpoint: unsupported version");
    ck.config_text = read_string(is);
    const uint32_t n = read_pod<uint32_t>(is);
    for (uint32_t i = 0; i < n; ++i) {
        CheckpointArray a;
        a.name = read_string(is);
        a.dtype = static_cast<ArrayDType>(read_pod<uint8_t>(is));
        const uint32_t ndim = read_pod<uint32_t>(is);
        for (uint32_t d = 0; d < ndim; ++d) {
            a.shape.push_back(read_pod<int64_t>(is));
        }
        const uint64_t bytes = read_pod<uint64_t>(is);
        a.bytes.resize(bytes);
        is.read(reinterpret_cast<char*>(a.bytes.data()),
                static_cast<std::streamsize>(bytes));
        check(static_cast<bool>(is), "checkpoint: truncated payload for " + a.name);
        ck.arrays_.push_back(std::move(a));
    }
    return ck;
}

}  // namespace wmc
