#pragma once

#include <map>
#include <string>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

// Named parameter container stored as "AVPC" + u32 version 1, followed by
// entries of (u32 name length, name, u32 rank, u64 extents, f64 payload),
// all little-endian, until end of file.
class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, Tensor value);
    void put_scalar(const std::string& name, double value) { put(name, Tensor::scalar(value)); }

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    // Throws ContractError when absent.
    const Tensor& get(const std::string& name) const;
    double get_scalar(const std::string& name) const;

    std::vector<std::string> names() const;
    const std::map<std::string, Tensor>& entries() const { return entries_; }

    std::vector<unsigned char> serialize() const;
    static Checkpoint deserialize(std::vector<unsigned char> bytes);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

private:
    std::map<std::string, Tensor> entries_;
};

}  // namespace avp
