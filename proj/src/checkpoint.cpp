#include "avp/checkpoint.hpp"

#include "avp/errors.hpp"
#include "byte_io.hpp"

namespace avp {

void Checkpoint::put(const std::string& name, Tensor value) { entries_.insert_or_assign(name, std::move(value)); }

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("checkpoint has no entry '" + name + "'");
    return it->second;
}

double Checkpoint::get_scalar(const std::string& name) const { return get(name).item(); }

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::vector<unsigned char> Checkpoint::serialize() const {
    detail::ByteWriter w;
    w.text("AVPC");
    w.u32(kVersion);
    for (const auto& [name, t] : entries_) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.text(name);
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) w.u64(e);
        w.f64s(t.data().data(), t.numel());
    }
    return w.buffer();
}

Checkpoint Checkpoint::deserialize(std::vector<unsigned char> bytes) {
    detail::ByteReader r(std::move(bytes));
    if (r.text(4, "magic") != "AVPC") throw FormatError("bad checkpoint magic", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    Checkpoint ck;
    while (!r.at_end()) {
        const std::size_t entry_start = r.offset();
        const std::uint32_t len = r.u32("entry name length");
        std::string name = r.text(len, "entry name");
        const std::uint32_t rank = r.u32("entry rank");
        Shape shape(rank);
        for (auto& e : shape) {
            e = r.u64("entry extent");
            if (e == 0) throw FormatError("zero extent in entry '" + name + "'", r.offset() - 8);
        }
        const std::size_t n = shape_numel(shape);
        if (r.remaining() / sizeof(double) < n) {
            throw FormatError("truncated payload of entry '" + name + "'", r.offset());
        }
        std::vector<double> data(n);
        r.read(data.data(), n * sizeof(double), "entry payload");
        if (ck.contains(name)) throw FormatError("duplicate entry '" + name + "'", entry_start);
        ck.put(name, Tensor(std::move(shape), std::move(data)));
    }
    return ck;
}

void Checkpoint::save(const std::string& path) const { detail::write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return deserialize(detail::read_file(path)); }

}  // namespace avp
