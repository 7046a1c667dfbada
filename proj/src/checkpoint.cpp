#include "dismesh/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dismesh {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'C', 'K', '0', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& in, T* v, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(v), sizeof(T))) {
        throw TensorError(path + ": truncated checkpoint");
    }
}

void write_mat(std::ostream& out, const Mat& m) {
    write_pod(out, static_cast<std::int64_t>(m.rows()));
    write_pod(out, static_cast<std::int64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

Mat read_mat(std::istream& in, const std::string& path) {
    std::int64_t rows = 0, cols = 0;
    read_pod(in, &rows, path);
    read_pod(in, &cols, path);
    Mat m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())))) {
        throw TensorError(path + ": truncated checkpoint");
    }
    return m;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
    std::uint32_t len = 0;
    read_pod(in, &len, path);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw TensorError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TensorError(path + ": cannot open for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, ckpt.step);
    write_pod(out, ckpt.config_hash);
    write_string(out, ckpt.config_json);
    write_pod(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, m] : ckpt.tensors) {
        write_string(out, name);
        write_mat(out, m);
    }
    write_pod(out, static_cast<std::uint8_t>(ckpt.has_optimizer ? 1 : 0));
    if (ckpt.has_optimizer) {
        write_pod(out, ckpt.adam_t);
        for (const Mat& m : ckpt.adam_m) write_mat(out, m);
        for (const Mat& v : ckpt.adam_v) write_mat(out, v);
    }
    if (!out) throw TensorError(path + ": write failure");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorError(path + ": cannot open checkpoint");
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw TensorError(path + ": not a checkpoint file (bad magic)");
    }
    Checkpoint ckpt;
    read_pod(in, &ckpt.step, path);
    read_pod(in, &ckpt.config_hash, path);
    ckpt.config_json = read_string(in, path);
    std::uint32_t count = 0;
    read_pod(in, &count, path);
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(in, path);
        ckpt.tensors.emplace_back(std::move(name), read_mat(in, path));
    }
    std::uint8_t has_opt = 0;
    read_pod(in, &has_opt, path);
    ckpt.has_optimizer = has_opt != 0;
    if (ckpt.has_optimizer) {
        read_pod(in, &ckpt.adam_t, path);
        ckpt.adam_m.reserve(count);
        ckpt.adam_v.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) ckpt.adam_m.push_back(read_mat(in, path));
        for (std::uint32_t i = 0; i < count; ++i) ckpt.adam_v.push_back(read_mat(in, path));
    }
    return ckpt;
}

}  // namespace dismesh
