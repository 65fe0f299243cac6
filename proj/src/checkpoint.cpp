#include "ufp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace ufp {

namespace {

constexpr char kMagic[4] = {'U', 'F', 'P', 'C'};
constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

class PayloadWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void tensor(const DenseTensor& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) u64(e);
        u64(t.size());
        for (float v : t.values()) f32(v);
    }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    std::uint64_t checksum() const {
        std::uint64_t h = kFnvOffset;
        for (std::uint8_t b : bytes_) {
            h ^= b;
            h *= kFnvPrime;
        }
        return h;
    }

private:
    std::vector<std::uint8_t> bytes_;
};

class PayloadReader {
public:
    explicit PayloadReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const std::uint8_t* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    DenseTensor tensor() {
        const std::uint32_t rank = u32();
        if (rank > 8) throw CorruptCheckpoint("implausible tensor rank");
        Shape shape(rank);
        for (auto& e : shape) e = u64();
        const std::uint64_t count = u64();
        if (count != shape_numel(shape)) {
            throw CorruptCheckpoint("tensor element count does not match shape");
        }
        std::vector<float> data(count);
        for (auto& v : data) v = f32();
        return DenseTensor(std::move(shape), std::move(data));
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

    std::uint64_t checksum() const {
        std::uint64_t h = kFnvOffset;
        for (std::uint8_t b : bytes_) {
            h ^= b;
            h *= kFnvPrime;
        }
        return h;
    }

private:
    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw CorruptCheckpoint("truncated checkpoint payload");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void write_desc(PayloadWriter& w, const ModelDesc& d) {
    w.u32(static_cast<std::uint32_t>(d.input_shape.size()));
    for (std::size_t e : d.input_shape) w.u64(e);
    w.u32(d.num_classes);
    w.u64(d.uncertainty_width);
    w.u8(d.uncertainty_pool ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(d.backbone.size()));
    for (const LayerDesc& ld : d.backbone) {
        w.u8(static_cast<std::uint8_t>(ld.kind));
        w.u64(ld.d0);
        w.u64(ld.d1);
        w.u64(ld.d2);
        w.u64(ld.d3);
        w.u64(ld.d4);
        w.u8(static_cast<std::uint8_t>((ld.flag ? 1 : 0) | (ld.flag2 ? 2 : 0)));
    }
}

ModelDesc read_desc(PayloadReader& r) {
    ModelDesc d;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw CorruptCheckpoint("implausible input rank");
    d.input_shape.resize(rank);
    for (auto& e : d.input_shape) e = r.u64();
    d.num_classes = r.u32();
    d.uncertainty_width = r.u64();
    d.uncertainty_pool = r.u8() != 0;
    const std::uint32_t n_layers = r.u32();
    if (n_layers > 4096) throw CorruptCheckpoint("implausible layer count");
    d.backbone.resize(n_layers);
    for (auto& ld : d.backbone) {
        ld.kind = static_cast<LayerKind>(r.u8());
        if (static_cast<std::uint8_t>(ld.kind) > 5) {
            throw CorruptCheckpoint("unknown layer kind in checkpoint");
        }
        ld.d0 = r.u64();
        ld.d1 = r.u64();
        ld.d2 = r.u64();
        ld.d3 = r.u64();
        ld.d4 = r.u64();
        const std::uint8_t flags = r.u8();
        ld.flag = flags & 1;
        ld.flag2 = flags & 2;
    }
    return d;
}

} // namespace

void save_checkpoint(const DualHeadModel& m, const std::string& path) {
    PayloadWriter w;
    write_desc(w, m.desc());
    w.u8(static_cast<std::uint8_t>((m.stage1_done() ? 1 : 0) | (m.stage2_done() ? 2 : 0) |
                                   (m.is_deployed() ? 4 : 0)));
    w.u64(m.train_seed());

    const auto params = m.all_params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const ParamTensor* p : params) {
        w.tensor(p->value);
        w.tensor(p->deployed);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WriteError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kCheckpointVersion;
    std::uint8_t vbytes[4];
    for (int i = 0; i < 4; ++i) vbytes[i] = static_cast<std::uint8_t>(version >> (8 * i));
    out.write(reinterpret_cast<const char*>(vbytes), 4);
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.bytes().size()));
    const std::uint64_t sum = w.checksum();
    std::uint8_t sbytes[8];
    for (int i = 0; i < 8; ++i) sbytes[i] = static_cast<std::uint8_t>(sum >> (8 * i));
    out.write(reinterpret_cast<const char*>(sbytes), 8);
    if (!out) throw WriteError("save_checkpoint: write failed for " + path);
}

DualHeadModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_checkpoint: cannot open " + path);
    std::vector<std::uint8_t> all((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (all.size() < 16) throw FormatError("load_checkpoint: file too short");
    if (std::memcmp(all.data(), kMagic, 4) != 0) {
        throw FormatError("load_checkpoint: bad magic");
    }
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= std::uint32_t(all[4 + i]) << (8 * i);
    if (version != kCheckpointVersion) {
        throw UnsupportedVersion("load_checkpoint: version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
    }

    std::uint64_t stored_sum = 0;
    for (int i = 0; i < 8; ++i) {
        stored_sum |= std::uint64_t(all[all.size() - 8 + i]) << (8 * i);
    }
    PayloadReader r(std::vector<std::uint8_t>(all.begin() + 8, all.end() - 8));
    if (r.checksum() != stored_sum) {
        throw CorruptCheckpoint("load_checkpoint: checksum mismatch");
    }

    const ModelDesc desc = read_desc(r);
    const std::uint8_t stage_flags = r.u8();
    const std::uint64_t train_seed = r.u64();

    DualHeadModel m = DualHeadModel::build(desc, /*init_seed=*/train_seed);
    const std::uint32_t n_params = r.u32();
    const auto params = m.all_params();
    if (n_params != params.size()) {
        throw CorruptCheckpoint("load_checkpoint: parameter group count mismatch");
    }
    for (ParamTensor* p : params) {
        DenseTensor value = r.tensor();
        DenseTensor deployed = r.tensor();
        if (value.shape() != p->value.shape()) {
            throw CorruptCheckpoint("load_checkpoint: parameter shape mismatch");
        }
        p->value = std::move(value);
        p->deployed = std::move(deployed);
    }
    if (!r.exhausted()) throw CorruptCheckpoint("load_checkpoint: trailing bytes");

    for (Layer* l : m.backbone_layers()) l->sync_packed_views();
    m.prediction_head()->sync_packed_views();
    if (m.uncertainty_head()) m.uncertainty_head()->sync_packed_views();

    m.set_stage1_done(stage_flags & 1);
    m.set_stage2_done(stage_flags & 2);
    m.set_train_seed(train_seed);
    if (!(stage_flags & 4)) m.invalidate_deployment();
    return m;
}

} // namespace ufp
