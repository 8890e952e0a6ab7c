#include "aftsgd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <zlib.h>

#include "aftsgd/error.hpp"

namespace aftsgd {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little-endian");

constexpr std::string_view kMagic = "AFTSGDCK";

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void u8(std::uint8_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u64(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void vec(const Coefficients& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    bool flag() {
        const auto v = u8();
        if (v > 1) throw CheckpointError("checkpoint payload is malformed");
        return v == 1;
    }
    std::string str() {
        const auto n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    Coefficients vec() {
        const auto n = u64();
        need(n * 8);
        Coefficients v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > size_ - pos_) throw CheckpointError("checkpoint payload is truncated");
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

void put_state(Writer& w, const EstimatorState& s) {
    w.u64(s.batch_count);
    w.f64(s.schedule.gamma1());
    w.f64(s.schedule.alpha());
    w.vec(s.beta_hat);
    w.vec(s.beta_bar);
}

EstimatorState get_state(Reader& r) {
    EstimatorState s;
    s.batch_count = r.u64();
    const double gamma1 = r.f64();
    const double alpha = r.f64();
    try {
        s.schedule = LearningRateSchedule(gamma1, alpha);
    } catch (const ConfigError&) {
        throw CheckpointError("checkpoint holds an invalid learning-rate schedule");
    }
    s.beta_hat = r.vec();
    s.beta_bar = r.vec();
    if (s.beta_hat.size() != s.beta_bar.size()) throw CheckpointError("checkpoint state is inconsistent");
    return s;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large payloads in pieces.
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

template <typename Enum>
Enum enum_from(std::uint8_t v, std::uint8_t max) {
    if (v > max) throw CheckpointError("checkpoint payload is malformed");
    return static_cast<Enum>(v);
}

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
    Writer w;
    const RunConfig& cfg = c.config;
    w.u64(cfg.k);
    w.u64(cfg.B);
    w.f64(cfg.ci_level);
    w.u8(static_cast<std::uint8_t>(cfg.ci_method));
    const LearningRateSchedule schedule = cfg.schedule();
    w.f64(schedule.gamma1());
    w.f64(schedule.alpha());
    w.u64(cfg.seed);
    w.u8(static_cast<std::uint8_t>(cfg.weight_law));
    w.str(cfg.input);
    w.u8(cfg.checkpoint_path ? 1 : 0);
    w.str(cfg.checkpoint_path.value_or(""));
    w.u8(static_cast<std::uint8_t>(cfg.output_format));
    w.u8(cfg.header ? 1 : 0);
    w.u8(cfg.skip_bad ? 1 : 0);

    const BootstrapEnsemble& e = c.ensemble;
    w.u64(e.seed);
    w.u8(static_cast<std::uint8_t>(e.weight_law));
    put_state(w, e.main);
    w.u64(e.replicates.size());
    for (const auto& rep : e.replicates) {
        w.u32(rep.replicate_id);
        put_state(w, rep.state);
    }

    w.u64(c.batches_consumed);
    w.u64(c.records_read);
    w.u64(c.records_skipped);
    w.u64(c.pending.size());
    for (const auto& obs : c.pending) {
        w.f64(obs.log_time);
        w.u8(obs.event ? 1 : 0);
        w.u64(obs.covariates.size());
        for (double x : obs.covariates) w.f64(x);
    }
    w.u64(c.column_names.size());
    for (const auto& n : c.column_names) w.str(n);

    Writer out;
    out.bytes.assign(kMagic.begin(), kMagic.end());
    out.u32(c.version);
    out.u64(w.bytes.size());
    out.bytes.insert(out.bytes.end(), w.bytes.begin(), w.bytes.end());
    out.u32(crc_of(w.bytes.data(), w.bytes.size()));
    return out.bytes;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    constexpr std::size_t head = 8 + 4 + 8;
    if (bytes.size() < head + 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw CheckpointError("not a checkpoint file");
    }
    Reader env(bytes.data() + 8, bytes.size() - 8);
    const auto version = env.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    const auto length = env.u64();
    if (length != bytes.size() - head - 4) throw CheckpointError("checkpoint length does not match the file");
    const std::uint8_t* payload = bytes.data() + head;
    std::uint32_t stored = 0;
    std::memcpy(&stored, payload + length, 4);
    if (stored != crc_of(payload, length)) throw CheckpointError("checkpoint checksum mismatch (file is corrupt)");

    Reader r(payload, length);
    Checkpoint c;
    c.version = version;
    RunConfig& cfg = c.config;
    cfg.k = r.u64();
    cfg.B = r.u64();
    cfg.ci_level = r.f64();
    cfg.ci_method = enum_from<CiMethod>(r.u8(), 1);
    {
        const double gamma1 = r.f64();
        const double alpha = r.f64();
        try {
            (void)LearningRateSchedule(gamma1, alpha);
            cfg.gamma1 = gamma1;
            cfg.alpha = alpha;
        } catch (const ConfigError&) {
            throw CheckpointError("checkpoint holds an invalid learning-rate schedule");
        }
    }
    cfg.seed = r.u64();
    cfg.weight_law = enum_from<WeightLaw>(r.u8(), 2);
    cfg.input = r.str();
    const bool has_ck = r.flag();
    std::string ck = r.str();
    if (has_ck) cfg.checkpoint_path = std::move(ck);
    cfg.output_format = enum_from<OutputFormat>(r.u8(), 2);
    cfg.header = r.flag();
    cfg.skip_bad = r.flag();

    BootstrapEnsemble& e = c.ensemble;
    e.seed = r.u64();
    e.weight_law = enum_from<WeightLaw>(r.u8(), 2);
    e.main = get_state(r);
    const auto B = r.u64();
    if (B > r.remaining()) throw CheckpointError("checkpoint payload is truncated");
    e.replicates.reserve(B);
    for (std::uint64_t b = 0; b < B; ++b) {
        ReplicateState rep;
        rep.replicate_id = r.u32();
        rep.state = get_state(r);
        if (rep.state.dimension() != e.main.dimension() || rep.state.batch_count != e.main.batch_count) {
            throw CheckpointError("checkpoint replicates are out of lockstep");
        }
        e.replicates.push_back(std::move(rep));
    }

    c.batches_consumed = r.u64();
    c.records_read = r.u64();
    c.records_skipped = r.u64();
    const auto n_pending = r.u64();
    if (n_pending > r.remaining()) throw CheckpointError("checkpoint payload is truncated");
    c.pending.reserve(n_pending);
    for (std::uint64_t i = 0; i < n_pending; ++i) {
        Observation obs;
        obs.log_time = r.f64();
        obs.event = r.flag();
        const auto p = r.u64();
        if (p != e.main.dimension()) throw CheckpointError("pending record has the wrong dimension");
        obs.covariates.resize(p);
        for (auto& x : obs.covariates) x = r.f64();
        c.pending.push_back(std::move(obs));
    }
    const auto n_names = r.u64();
    if (n_names > r.remaining()) throw CheckpointError("checkpoint payload is truncated");
    for (std::uint64_t i = 0; i < n_names; ++i) c.column_names.push_back(r.str());
    if (r.remaining() != 0) throw CheckpointError("checkpoint payload has trailing bytes");
    if (c.batches_consumed != e.main.batch_count) throw CheckpointError("checkpoint batch counters disagree");
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(checkpoint);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw CheckpointError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

void check_resume_compatible(const Checkpoint& checkpoint, const RunConfig& config) {
    const RunConfig& saved = checkpoint.config;
    auto reject = [](const std::string& what) {
        throw CheckpointError("cannot resume: " + what + " differs from the checkpoint");
    };
    if (saved.k != config.k) reject("batch size k");
    if (saved.B != config.B) reject("replicate count B");
    if (saved.seed != config.seed) reject("seed");
    if (!(saved.schedule() == config.schedule())) reject("learning-rate schedule");
    if (saved.weight_law != config.weight_law) reject("weight law");
}

} // namespace aftsgd
