#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnsde {

// Dense row-major float32 array. Value-semantic; shape is a plain dim list.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f);

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    float& operator[](std::size_t i) { return data[i]; }
    float operator[](std::size_t i) const { return data[i]; }

    // 2-D / 3-D accessors (row-major)
    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
    float& at(int ch, int r, int c) {
        return data[(static_cast<std::size_t>(ch) * shape[1] + r) * shape[2] + c];
    }
    float at(int ch, int r, int c) const {
        return data[(static_cast<std::size_t>(ch) * shape[1] + r) * shape[2] + c];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

std::size_t shape_numel(const std::vector<int>& shape);

// Named collection of trainable arrays with matching gradients.
class ParamStore {
  public:
    struct Entry {
        Tensor value;
        Tensor grad;
    };

    Tensor& add(const std::string& name, Tensor init);
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    void zero_grad();
    std::size_t num_params() const;

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

  private:
    std::map<std::string, Entry> entries_;
};

// RNTENSOR container: 8-byte magic, u32 little-endian header length,
// UTF-8 JSON header, raw little-endian f32 payload.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);
void save_params(const std::string& path, const ParamStore& store,
                 const std::map<std::string, std::string>& meta = {});
void load_params(const std::string& path, ParamStore& store,
                 std::map<std::string, std::string>* meta = nullptr);

// Linear [0,1] -> 8-bit grayscale PNG.
void export_png(const std::string& path, const Tensor& img);

std::uint64_t fnv1a_file(const std::string& path);

}  // namespace rnsde
