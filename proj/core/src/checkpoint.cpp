#include "flowlab/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void append_f64(std::string& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    append_u64(out, bits);
}

struct Cursor {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw IoError("truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = data.substr(pos, n);
        pos += n;
        return out;
    }
};

std::uint32_t crc_of(const std::string& bytes, std::size_t len) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(len));
    return static_cast<std::uint32_t>(crc);
}

json net_config_json(const VelocityNetConfig& c) {
    return json{{"data_dim", c.data_dim},   {"hidden", c.hidden},
                {"depth", c.depth},         {"time_dim", c.time_dim},
                {"class_dim", c.class_dim}, {"n_classes", c.n_classes},
                {"zero_init_last", c.zero_init_last}};
}

VelocityNetConfig net_config_from_json(const json& j) {
    VelocityNetConfig c;
    c.data_dim = j.at("data_dim").get<std::int64_t>();
    c.hidden = j.at("hidden").get<std::int64_t>();
    c.depth = j.at("depth").get<std::int64_t>();
    c.time_dim = j.at("time_dim").get<std::int64_t>();
    c.class_dim = j.at("class_dim").get<std::int64_t>();
    c.n_classes = j.at("n_classes").get<std::int64_t>();
    c.zero_init_last = j.at("zero_init_last").get<bool>();
    return c;
}

json adam_json(const AdamState& a) {
    return json{{"beta1", a.config().beta1},
                {"beta2", a.config().beta2},
                {"eps", a.config().eps},
                {"step_count", a.step_count()}};
}

void append_params(CheckpointData& data, const std::string& prefix,
                   const std::map<std::string, Tensor>& params) {
    for (const auto& [name, value] : params) data.blocks.emplace_back(prefix + name, value);
}

// Pulls every block under `prefix` into a name -> Tensor map.
std::map<std::string, Tensor> take_params(const CheckpointData& data, const std::string& prefix) {
    std::map<std::string, Tensor> out;
    for (const auto& [name, value] : data.blocks) {
        if (name.rfind(prefix, 0) == 0) out.emplace(name.substr(prefix.size()), value);
    }
    return out;
}

void assign_params(std::map<std::string, Tensor>& dst, std::map<std::string, Tensor> src,
                   const std::string& what) {
    if (src.size() != dst.size()) {
        throw IoError("checkpoint: " + what + " has " + std::to_string(src.size()) +
                      " blocks, expected " + std::to_string(dst.size()));
    }
    for (auto& [name, value] : dst) {
        auto it = src.find(name);
        if (it == src.end()) throw IoError("checkpoint: " + what + " missing block " + name);
        if (!it->second.same_shape(value)) {
            throw IoError("checkpoint: " + what + " block " + name + " has shape " +
                          shape_str(it->second.shape()) + ", expected " +
                          shape_str(value.shape()));
        }
        value = std::move(it->second);
    }
}

AdamState restore_adam(const json& j, const CheckpointData& data, const std::string& prefix) {
    AdamConfig cfg;
    cfg.beta1 = j.at("beta1").get<double>();
    cfg.beta2 = j.at("beta2").get<double>();
    cfg.eps = j.at("eps").get<double>();
    AdamState state(cfg);
    state.restore(take_params(data, prefix + ".m."), take_params(data, prefix + ".v."),
                  j.at("step_count").get<std::int64_t>());
    return state;
}

json parse_meta(const CheckpointData& data) {
    json j = json::parse(data.meta, nullptr, false);
    if (j.is_discarded()) throw IoError("checkpoint: meta is not valid JSON");
    return j;
}

void expect_kind(const CheckpointData& data, const std::string& kind) {
    if (data.kind != kind) {
        throw IoError("checkpoint kind '" + data.kind + "' where '" + kind + "' expected");
    }
}

// Builds a net with the right architecture, then overwrites its parameters.
VelocityNet rebuild_net(const VelocityNetConfig& cfg, const CheckpointData& data,
                        const std::string& prefix) {
    Rng scratch(0);
    VelocityNet net(cfg, scratch);
    assign_params(net.params(), take_params(data, prefix), prefix + "*");
    return net;
}

}  // namespace

void save_checkpoint_raw(const CheckpointData& data, const std::string& path) {
    std::string buf(kMagic, sizeof(kMagic));
    append_u32(buf, kVersion);
    append_u32(buf, static_cast<std::uint32_t>(data.kind.size()));
    buf += data.kind;
    append_u64(buf, data.meta.size());
    buf += data.meta;
    append_u64(buf, data.blocks.size());
    for (const auto& [name, value] : data.blocks) {
        append_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf += name;
        append_u32(buf, static_cast<std::uint32_t>(value.rank()));
        for (std::int64_t d : value.shape()) append_u64(buf, static_cast<std::uint64_t>(d));
        for (double v : value.values()) append_f64(buf, v);
    }
    append_u64(buf, data.rng_state.size());
    buf += data.rng_state;
    append_u32(buf, crc_of(buf, buf.size()));

    const std::filesystem::path target(path);
    std::error_code ec;
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + path + " (" + ec.message() + ")");

    json side;
    side["kind"] = data.kind;
    side["meta"] = parse_meta(data);
    json blocks = json::array();
    for (const auto& [name, value] : data.blocks) {
        blocks.push_back(json{{"name", name}, {"shape", value.shape()}});
    }
    side["blocks"] = blocks;
    std::ofstream sidecar(path + ".json", std::ios::binary | std::ios::trunc);
    if (!sidecar) throw IoError("cannot open for writing: " + path + ".json");
    sidecar << side.dump(2) << "\n";
}

CheckpointData load_checkpoint_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a flowlab checkpoint: " + path);
    }
    const std::uint32_t stored_crc = [&] {
        Cursor tail{buf, buf.size() - 4};
        return tail.u32();
    }();
    if (crc_of(buf, buf.size() - 4) != stored_crc) {
        throw IoError("checksum mismatch (corrupt checkpoint): " + path);
    }

    Cursor cur{buf, sizeof(kMagic)};
    const std::uint32_t version = cur.u32();
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + "): " + path);
    }
    CheckpointData data;
    data.kind = cur.bytes(cur.u32());
    data.meta = cur.bytes(cur.u64());
    const std::uint64_t n_blocks = cur.u64();
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
        std::string name = cur.bytes(cur.u32());
        const std::uint32_t rank = cur.u32();
        std::vector<std::int64_t> shape;
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<std::int64_t>(cur.u64()));
            numel *= shape.back();
        }
        Tensor value(shape);
        for (std::int64_t i = 0; i < numel; ++i) value[i] = cur.f64();
        data.blocks.emplace_back(std::move(name), std::move(value));
    }
    data.rng_state = cur.bytes(cur.u64());
    if (cur.pos != buf.size() - 4) throw IoError("trailing bytes in checkpoint: " + path);
    return data;
}

std::string checkpoint_kind(const std::string& path) { return load_checkpoint_raw(path).kind; }

void save_teacher_checkpoint(const TeacherState& state, const std::string& path) {
    CheckpointData data;
    data.kind = "teacher";
    json meta;
    meta["iter"] = state.iter;
    meta["net"] = net_config_json(state.net.config());
    meta["adam"] = adam_json(state.opt);
    data.meta = meta.dump();
    append_params(data, "net.", state.net.params());
    append_params(data, "adam.m.", state.opt.m());
    append_params(data, "adam.v.", state.opt.v());
    data.rng_state = state.rng.save_state();
    save_checkpoint_raw(data, path);
}

TeacherState load_teacher_checkpoint(const std::string& path) {
    const CheckpointData data = load_checkpoint_raw(path);
    expect_kind(data, "teacher");
    const json meta = parse_meta(data);
    TeacherState state;
    state.net = rebuild_net(net_config_from_json(meta.at("net")), data, "net.");
    state.opt = restore_adam(meta.at("adam"), data, "adam");
    state.rng.load_state(data.rng_state);
    state.iter = meta.at("iter").get<std::int64_t>();
    return state;
}

void save_distill_checkpoint(const DistillState& state, const std::string& path) {
    CheckpointData data;
    data.kind = "distill";
    json meta;
    meta["iter"] = state.iter;
    meta["net"] = net_config_json(state.student.config());
    meta["disc"] = json{{"data_dim", state.disc.config().data_dim},
                        {"hidden", state.disc.config().hidden},
                        {"depth", state.disc.config().depth}};
    meta["opt_student"] = adam_json(state.opt_student);
    meta["opt_disc"] = adam_json(state.opt_disc);
    data.meta = meta.dump();
    append_params(data, "teacher.", state.teacher.params());
    append_params(data, "student.", state.student.params());
    append_params(data, "ema.", state.ema.params());
    append_params(data, "disc.", state.disc.params());
    append_params(data, "opt_student.m.", state.opt_student.m());
    append_params(data, "opt_student.v.", state.opt_student.v());
    append_params(data, "opt_disc.m.", state.opt_disc.m());
    append_params(data, "opt_disc.v.", state.opt_disc.v());
    data.rng_state = state.rng.save_state();
    save_checkpoint_raw(data, path);
}

DistillState load_distill_checkpoint(const std::string& path) {
    const CheckpointData data = load_checkpoint_raw(path);
    expect_kind(data, "distill");
    const json meta = parse_meta(data);
    const VelocityNetConfig net_cfg = net_config_from_json(meta.at("net"));

    DistillState state;
    state.teacher = rebuild_net(net_cfg, data, "teacher.");
    state.student = rebuild_net(net_cfg, data, "student.");
    state.ema = rebuild_net(net_cfg, data, "ema.");
    DiscriminatorConfig dc;
    dc.data_dim = meta.at("disc").at("data_dim").get<std::int64_t>();
    dc.hidden = meta.at("disc").at("hidden").get<std::int64_t>();
    dc.depth = meta.at("disc").at("depth").get<std::int64_t>();
    Rng scratch(0);
    state.disc = Discriminator(dc, scratch);
    assign_params(state.disc.params(), take_params(data, "disc."), "disc.*");
    state.opt_student = restore_adam(meta.at("opt_student"), data, "opt_student");
    state.opt_disc = restore_adam(meta.at("opt_disc"), data, "opt_disc");
    state.rng.load_state(data.rng_state);
    state.iter = meta.at("iter").get<std::int64_t>();
    return state;
}

}  // namespace flowlab
