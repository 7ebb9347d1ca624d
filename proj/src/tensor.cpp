#include "rnsde/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace rnsde {

using json = nlohmann::json;

Tensor::Tensor(std::vector<int> s, float fill)
    : shape(std::move(s)), data(shape_numel(shape), fill) {}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    Entry e;
    e.grad = Tensor(init.shape);
    e.value = std::move(init);
    return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [_, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0f);
}

std::size_t ParamStore::num_params() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
}

namespace {

constexpr char kMagic[8] = {'R', 'N', 'T', 'E', 'N', 'S', 'O', 'R'};

void write_container(std::ostream& os, const json& header, const float* payload,
                     std::size_t count) {
    os.write(kMagic, 8);
    const std::string h = header.dump();
    const std::uint32_t len = static_cast<std::uint32_t>(h.size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    os.write(reinterpret_cast<const char*>(payload),
             static_cast<std::streamsize>(count * sizeof(float)));
}

json read_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not an RNTENSOR file");
    std::uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 4);
    std::string h(len, '\0');
    is.read(h.data(), len);
    if (!is) throw std::runtime_error(path + ": truncated header");
    return json::parse(h);
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    json h = {{"dtype", "f32"}, {"shape", t.shape}};
    write_container(os, h, t.data.data(), t.data.size());
    if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    json h = read_header(is, path);
    if (h.at("dtype") != "f32") throw std::runtime_error(path + ": unsupported dtype");
    Tensor t(h.at("shape").get<std::vector<int>>());
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!is) throw std::runtime_error(path + ": truncated payload");
    return t;
}

void save_params(const std::string& path, const ParamStore& store,
                 const std::map<std::string, std::string>& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    json ents = json::array();
    std::vector<float> payload;
    for (const auto& [name, e] : store.entries()) {
        ents.push_back({{"name", name}, {"shape", e.value.shape}});
        payload.insert(payload.end(), e.value.data.begin(), e.value.data.end());
    }
    json h = {{"dtype", "f32"}, {"entries", ents}};
    if (!meta.empty()) h["meta"] = meta;
    write_container(os, h, payload.data(), payload.size());
    if (!os) throw std::runtime_error("write failed: " + path);
}

void load_params(const std::string& path, ParamStore& store,
                 std::map<std::string, std::string>* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    json h = read_header(is, path);
    if (meta && h.contains("meta")) *meta = h["meta"].get<std::map<std::string, std::string>>();
    for (const auto& ent : h.at("entries")) {
        const std::string name = ent.at("name");
        const auto shape = ent.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!is) throw std::runtime_error(path + ": truncated payload at " + name);
        if (store.has(name)) {
            auto& e = store.entry(name);
            if (e.value.shape != shape)
                throw std::runtime_error(path + ": shape mismatch for " + name);
            e.value = std::move(t);
        } else {
            store.add(name, std::move(t));
        }
    }
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    return h;
}

}  // namespace rnsde
