#include "tlnet/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace tlnet {

namespace {
constexpr char kMagic[4] = {'T', 'L', 'N', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                          (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
    os.write((const char*)b, 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read((char*)b, 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((bits >> (8 * i)) & 0xff);
    os.write((const char*)b, 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read((char*)b, 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}
}  // namespace

VarPtr ParamStore::create(const std::string& name, Tensor4 init) {
    auto var = std::make_shared<Var>(std::move(init));
    params_[name] = var;
    return var;
}

VarPtr ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

void ParamStore::zero_grad() {
    for (auto& [_, p] : params_) p->grad.fill(0.0);
}

void ParamStore::step(OptimizerKind kind, double learning_rate, double l2_decay) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (auto& [name, p] : params_) {
        Tensor4& value = p->value;
        Tensor4& grad = p->grad;
        if (l2_decay != 0.0)
            for (size_t i = 0; i < value.size(); ++i) grad.data[i] += l2_decay * value.data[i];
        if (kind == OptimizerKind::sgd) {
            for (size_t i = 0; i < value.size(); ++i)
                value.data[i] -= learning_rate * grad.data[i];
        } else {
            AdamState& st = adam_[name];
            if (st.m.size() != value.size()) {
                st.m = Tensor4(value.n, value.c, value.h, value.w);
                st.v = Tensor4(value.n, value.c, value.h, value.w);
                st.t = 0;
            }
            ++st.t;
            const double bc1 = 1.0 - std::pow(beta1, double(st.t));
            const double bc2 = 1.0 - std::pow(beta2, double(st.t));
            for (size_t i = 0; i < value.size(); ++i) {
                st.m.data[i] = beta1 * st.m.data[i] + (1 - beta1) * grad.data[i];
                st.v.data[i] = beta2 * st.v.data[i] + (1 - beta2) * grad.data[i] * grad.data[i];
                const double mhat = st.m.data[i] / bc1;
                const double vhat = st.v.data[i] / bc2;
                value.data[i] -= learning_rate * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
}

void ParamStore::save(std::ostream& os) const {
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, (uint32_t)params_.size());
    for (const auto& [name, p] : params_) {
        write_u32(os, (uint32_t)name.size());
        os.write(name.data(), (std::streamsize)name.size());
        write_u32(os, (uint32_t)p->value.n);
        write_u32(os, (uint32_t)p->value.c);
        write_u32(os, (uint32_t)p->value.h);
        write_u32(os, (uint32_t)p->value.w);
        for (double v : p->value.data) write_f64(os, v);
    }
}

void ParamStore::load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointVersionMismatch("bad checkpoint magic");
    const uint32_t version = read_u32(is);
    if (version != kVersion)
        throw CheckpointVersionMismatch("checkpoint version " + std::to_string(version));
    const uint32_t count = read_u32(is);
    params_.clear();
    adam_.clear();
    for (uint32_t k = 0; k < count; ++k) {
        const uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const int n = (int)read_u32(is), c = (int)read_u32(is), h = (int)read_u32(is),
                  w = (int)read_u32(is);
        Tensor4 value(n, c, h, w);
        for (double& v : value.data) v = read_f64(is);
        if (!is) throw CheckpointVersionMismatch("truncated checkpoint");
        create(name, std::move(value));
    }
}

void ParamStore::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MissingFile("cannot open " + path + " for writing");
    save(os);
}

void ParamStore::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFile("cannot open " + path);
    load(is);
}

}  // namespace tlnet
