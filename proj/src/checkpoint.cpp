#include "gnnrisk/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "gnnrisk/digest.hpp"
#include "gnnrisk/errors.hpp"
#include "gnnrisk/io.hpp"

namespace gnnrisk {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'N', 'R', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;
constexpr std::size_t kDigestSize = 32;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
    void matrix(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (double v : m.values()) f64(v);
    }
    std::string take() { return std::move(buf_); }

private:
    void put_le(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t u64() { return get_le(8); }
    double f64() { return std::bit_cast<double>(get_le(8)); }
    Matrix matrix(const std::string& what) {
        const std::uint64_t rows = u32();
        const std::uint64_t cols = u32();
        if (rows * cols * 8 > remaining()) {
            throw TruncatedError("checkpoint: matrix " + what + " extends past end of payload");
        }
        std::vector<double> data(rows * cols);
        for (double& v : data) v = f64();
        try {
            return Matrix(rows, cols, std::move(data));
        } catch (const NumericError&) {
            throw IntegrityError("checkpoint: non-finite value in " + what);
        }
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::uint64_t get_le(int bytes) {
        if (remaining() < static_cast<std::size_t>(bytes)) {
            throw TruncatedError("checkpoint: unexpected end of data");
        }
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += bytes;
        return v;
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

template <typename Enum>
Enum checked_enum(std::uint8_t raw, std::uint8_t max, const char* what) {
    if (raw > max) throw ShapeError(std::string("checkpoint: invalid ") + what + " code");
    return static_cast<Enum>(raw);
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const LossLog& log) {
    params.validate();
    Writer body;
    body.u8(static_cast<std::uint8_t>(params.aggregation));
    body.u8(params.self_loops ? 1 : 0);
    body.u32(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        body.u8(static_cast<std::uint8_t>(l.kind));
        body.u8(l.activation == Activation::relu ? 0 : 1);
        body.u8(static_cast<std::uint8_t>(l.head_mode));
        body.u32(static_cast<std::uint32_t>(l.heads));
        body.u32(static_cast<std::uint32_t>(l.head_dim));
        body.matrix(l.weight);
        body.matrix(l.attention);
        body.matrix(l.projection);
    }
    body.matrix(params.classifier);
    body.u32(static_cast<std::uint32_t>(log.train_loss.size()));
    for (double v : log.train_loss) body.f64(v);
    for (double v : log.val_loss) body.f64(v);
    const std::string payload = body.take();

    Writer out;
    std::string head(kMagic, sizeof(kMagic));
    out.u32(kCheckpointVersion);
    out.u64(payload.size());
    head += out.take();
    const Sha256 digest = sha256(payload);
    return head + payload + std::string(reinterpret_cast<const char*>(digest.data()), digest.size());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < kHeaderSize) throw TruncatedError("checkpoint: file shorter than header");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw VersionError("checkpoint: bad magic, not a gnnrisk checkpoint");
    }
    Reader header(bytes.substr(sizeof(kMagic), kHeaderSize - sizeof(kMagic)));
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint: format version " + std::to_string(version) +
                           ", this build reads version " + std::to_string(kCheckpointVersion));
    }
    const std::uint64_t length = header.u64();
    if (bytes.size() - kHeaderSize < kDigestSize ||
        length > bytes.size() - kHeaderSize - kDigestSize) {
        throw TruncatedError("checkpoint: payload truncated");
    }
    if (length + kHeaderSize + kDigestSize != bytes.size()) {
        throw IntegrityError("checkpoint: trailing bytes after digest");
    }
    const std::string_view payload = bytes.substr(kHeaderSize, length);
    const Sha256 expected = sha256(payload);
    if (std::memcmp(expected.data(), bytes.data() + kHeaderSize + length, kDigestSize) != 0) {
        throw IntegrityError("checkpoint: checksum mismatch, file is corrupted");
    }

    Reader in(payload);
    Checkpoint ck;
    ck.params.aggregation = checked_enum<Aggregation>(in.u8(), 1, "aggregation");
    ck.params.self_loops = in.u8() != 0;
    const std::uint32_t layers = in.u32();
    for (std::uint32_t l = 0; l < layers; ++l) {
        const std::string name = "layer " + std::to_string(l);
        LayerParams p;
        p.kind = checked_enum<LayerKind>(in.u8(), 1, "layer kind");
        p.activation = in.u8() == 0 ? Activation::relu : Activation::identity;
        p.head_mode = checked_enum<HeadMode>(in.u8(), 1, "head mode");
        p.heads = in.u32();
        p.head_dim = in.u32();
        p.weight = in.matrix(name + " weight");
        p.attention = in.matrix(name + " attention");
        p.projection = in.matrix(name + " projection");
        ck.params.layers.push_back(std::move(p));
    }
    ck.params.classifier = in.matrix("classifier");
    const std::uint32_t epochs = in.u32();
    if (static_cast<std::uint64_t>(epochs) * 16 != in.remaining()) {
        throw TruncatedError("checkpoint: loss log length does not match payload");
    }
    ck.log.train_loss.resize(epochs);
    ck.log.val_loss.resize(epochs);
    for (double& v : ck.log.train_loss) v = in.f64();
    for (double& v : ck.log.val_loss) v = in.f64();
    ck.params.validate();
    return ck;
}

void save_checkpoint(const ModelParams& params, const LossLog& log,
                     const std::filesystem::path& path) {
    write_text_file(path, encode_checkpoint(params, log));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_text_file(path));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& expected) {
    Checkpoint ck = load_checkpoint(path);
    SeededRng rng(0);
    const ModelParams reference = init_params(expected, rng);
    std::vector<std::string> want;
    reference.for_each_matrix([&](const std::string& name, const Matrix& m) {
        want.push_back(name + ":" + m.shape_string());
    });
    std::vector<std::string> got;
    ck.params.for_each_matrix([&](const std::string& name, const Matrix& m) {
        got.push_back(name + ":" + m.shape_string());
    });
    if (want != got || reference.aggregation != ck.params.aggregation ||
        reference.self_loops != ck.params.self_loops) {
        throw ShapeError("checkpoint architecture does not match the expected model");
    }
    return ck;
}

}  // namespace gnnrisk
