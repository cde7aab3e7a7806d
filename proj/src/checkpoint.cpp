#include "fmim/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fmim {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'I', 'M'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& out, T v) {
    put_bytes(out, &v, sizeof(v));
}

void put_string(std::ostream& out, const std::string& s) {
    put<uint32_t>(out, static_cast<uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

void put_doubles(std::ostream& out, const std::vector<double>& xs) {
    put<uint64_t>(out, static_cast<uint64_t>(xs.size()));
    put_bytes(out, xs.data(), xs.size() * sizeof(double));
}

void get_bytes(std::istream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        throw std::runtime_error("checkpoint: truncated file");
}

template <typename T>
T get(std::istream& in) {
    T v;
    get_bytes(in, &v, sizeof(v));
    return v;
}

std::string get_string(std::istream& in) {
    uint32_t n = get<uint32_t>(in);
    std::string s(n, '\0');
    get_bytes(in, s.data(), n);
    return s;
}

std::vector<double> get_doubles(std::istream& in, size_t expected) {
    uint64_t n = get<uint64_t>(in);
    if (n != expected) throw std::runtime_error("checkpoint: parameter block size mismatch");
    std::vector<double> xs(n);
    get_bytes(in, xs.data(), n * sizeof(double));
    return xs;
}

void put_param_set(std::ostream& out, const ParamSet& p) {
    for (const auto& block : p.blocks()) put_doubles(out, *block.values);
}

void get_param_set(std::istream& in, ParamSet& p) {
    for (auto& block : p.blocks()) *block.values = get_doubles(in, block.values->size());
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    put_bytes(out, kMagic, sizeof(kMagic));
    put<uint32_t>(out, kVersion);

    const TaggerConfig& c = ckpt.config;
    put<int64_t>(out, c.vocab_size);
    put<int64_t>(out, c.embed_dim);
    put<int64_t>(out, c.context_window);
    put<int64_t>(out, c.hidden_dim);
    put<int64_t>(out, c.num_layers);
    put<int64_t>(out, c.num_tags);
    put<int64_t>(out, c.max_len);
    put<uint64_t>(out, c.seed);

    put<uint8_t>(out, ckpt.scheme.kind == SchemeKind::BIO ? 1 : 0);
    put<uint32_t>(out, static_cast<uint32_t>(ckpt.scheme.tags.size()));
    for (const std::string& t : ckpt.scheme.tags) put_string(out, t);

    put<uint32_t>(out, static_cast<uint32_t>(ckpt.vocab.id_to_token.size()));
    for (const std::string& t : ckpt.vocab.id_to_token) put_string(out, t);

    put_param_set(out, ckpt.params);

    put<uint8_t>(out, ckpt.optim ? 1 : 0);
    if (ckpt.optim) {
        put<int64_t>(out, ckpt.optim->t);
        put_param_set(out, ckpt.optim->m);
        put_param_set(out, ckpt.optim->v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[4];
    get_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    uint32_t version = get<uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    TaggerConfig& c = ckpt.config;
    c.vocab_size = static_cast<int>(get<int64_t>(in));
    c.embed_dim = static_cast<int>(get<int64_t>(in));
    c.context_window = static_cast<int>(get<int64_t>(in));
    c.hidden_dim = static_cast<int>(get<int64_t>(in));
    c.num_layers = static_cast<int>(get<int64_t>(in));
    c.num_tags = static_cast<int>(get<int64_t>(in));
    c.max_len = static_cast<int>(get<int64_t>(in));
    c.seed = get<uint64_t>(in);
    c.validate();

    ckpt.scheme.kind = get<uint8_t>(in) == 1 ? SchemeKind::BIO : SchemeKind::UnifiedSentiment;
    uint32_t n_tags = get<uint32_t>(in);
    ckpt.scheme.tags.clear();
    for (uint32_t i = 0; i < n_tags; ++i) ckpt.scheme.tags.push_back(get_string(in));
    ckpt.scheme.check();

    uint32_t n_vocab = get<uint32_t>(in);
    if (static_cast<int>(n_vocab) != c.vocab_size)
        throw std::runtime_error("checkpoint: vocabulary size mismatch");
    ckpt.vocab.id_to_token.clear();
    for (uint32_t i = 0; i < n_vocab; ++i) {
        std::string tok = get_string(in);
        if (i >= 2) ckpt.vocab.token_to_id.emplace(tok, static_cast<int>(i));
        ckpt.vocab.id_to_token.push_back(std::move(tok));
    }

    ckpt.params = ParamSet::zeros_like(c);
    get_param_set(in, ckpt.params);

    if (get<uint8_t>(in) == 1) {
        OptimState st = OptimState::init(ckpt.params);
        st.t = get<int64_t>(in);
        get_param_set(in, st.m);
        get_param_set(in, st.v);
        ckpt.optim = std::move(st);
    }
    return ckpt;
}

}  // namespace fmim
