#include "fruitnet/checkpoint.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace fruitnet {

namespace {

using nlohmann::json;

constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { detail::put_u32_le(os, v); }

template <class T>
const char* precision_name() {
    return sizeof(T) == 4 ? "single" : "double";
}

template <class T>
json header_json(const Session<T>& session, const TrainConfig& cfg,
                 const std::vector<std::string>& class_names) {
    const auto& spec = session.net.spec;
    json h;
    h["format"] = "fruitnet-checkpoint";
    h["case"] = spec.case_id;
    h["input"] = {spec.in_channels, spec.in_h, spec.in_w};
    h["num_classes"] = spec.num_classes;
    h["class_names"] = class_names;
    h["precision"] = precision_name<T>();
    h["epoch"] = session.epoch;
    h["config"] = {{"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"lr", cfg.eta},
                   {"seed", cfg.seed},
                   {"deterministic", cfg.deterministic},
                   {"lr_factor", cfg.lr_factor},
                   {"lr_patience", cfg.lr_patience},
                   {"min_lr", cfg.min_lr}};
    // randomness is derived per (seed, epoch, purpose); the seed is the
    // whole generator state needed for replay
    h["prng"] = {{"algorithm", "splitmix64"}, {"seed", cfg.seed}};
    json lr;
    lr["eta"] = session.eta;
    lr["epochs_since_improve"] = session.sched.epochs_since_improve;
    if (std::isfinite(session.sched.best_metric))
        lr["best_metric"] = session.sched.best_metric;
    h["lr_state"] = lr;

    json adam;
    adam["beta1"] = session.opt.empty() ? 0.9 : session.opt.front().beta1;
    adam["beta2"] = session.opt.empty() ? 0.999 : session.opt.front().beta2;
    adam["eps"] = session.opt.empty() ? 1e-8 : session.opt.front().eps;
    json steps = json::array();
    for (const auto& st : session.opt) steps.push_back(st.t);
    adam["t"] = steps;
    h["adam"] = adam;
    return h;
}

}  // namespace

template <class T>
void save_checkpoint(const Session<T>& session, const TrainConfig& cfg,
                     const std::vector<std::string>& class_names,
                     const std::filesystem::path& file) {
    auto params = parameters(session.net);
    if (params.size() != session.opt.size())
        throw std::invalid_argument("save_checkpoint: optimizer/parameter mismatch");

    json header = header_json(session, cfg, class_names);
    json tensors = json::array();
    for (const auto& p : params) {
        tensors.push_back(p.name);
        tensors.push_back(p.name + ".m");
        tensors.push_back(p.name + ".v");
    }
    header["tensors"] = tensors;
    const std::string header_text = header.dump();

    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os.write("FRCK", 4);
        put_u32(os, kVersion);
        put_u32(os, static_cast<std::uint32_t>(header_text.size()));
        os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            write_tensor(os, *params[i].value);
            write_tensor(os, session.opt[i].m);
            write_tensor(os, session.opt[i].v);
        }
        if (!os) throw std::runtime_error("failed writing checkpoint " + file.string());
    }
    std::filesystem::rename(tmp, file);
}

template void save_checkpoint<float>(const Session<float>&, const TrainConfig&,
                                     const std::vector<std::string>&,
                                     const std::filesystem::path&);
template void save_checkpoint<double>(const Session<double>&, const TrainConfig&,
                                      const std::vector<std::string>&,
                                      const std::filesystem::path&);

namespace {

template <class T>
Session<T> load_session(std::istream& is, const json& h, const CheckpointMeta& meta) {
    auto spec = make_case_spec(meta.case_id, meta.class_names.size(), meta.in_h, meta.in_w,
                               meta.in_channels);
    Session<T> session = make_session(build_network<T>(spec, meta.cfg.seed), meta.cfg);
    session.epoch = meta.epoch;
    session.eta = h.at("lr_state").at("eta").get<double>();
    session.sched.epochs_since_improve = h.at("lr_state").at("epochs_since_improve").get<int>();
    if (h.at("lr_state").contains("best_metric"))
        session.sched.best_metric = h.at("lr_state").at("best_metric").get<double>();

    const auto& adam = h.at("adam");
    auto params = parameters(session.net);
    const auto steps = adam.at("t").get<std::vector<std::uint64_t>>();
    if (steps.size() != params.size())
        throw std::runtime_error("checkpoint: adam step list does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        *params[i].value = read_tensor<T>(is);
        session.opt[i].m = read_tensor<T>(is);
        session.opt[i].v = read_tensor<T>(is);
        session.opt[i].t = steps[i];
        session.opt[i].beta1 = adam.at("beta1").get<double>();
        session.opt[i].beta2 = adam.at("beta2").get<double>();
        session.opt[i].eps = adam.at("eps").get<double>();
        session.opt[i].eta = session.eta;
        if (params[i].value->shape() != session.opt[i].m.shape())
            throw std::runtime_error("checkpoint: tensor shape mismatch at " + params[i].name);
    }
    return session;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + file.string());

    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FRCK", 4) != 0)
        throw std::runtime_error(file.string() + ": not a checkpoint (bad magic)");
    const std::uint32_t version = detail::get_u32_le(is);
    if (version != kVersion)
        throw std::runtime_error(file.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const std::uint32_t header_len = detail::get_u32_le(is);
    std::string header_text(header_len, '\0');
    if (!is.read(header_text.data(), header_len))
        throw std::runtime_error(file.string() + ": truncated header");

    json h;
    try {
        h = json::parse(header_text);
    } catch (const json::exception& e) {
        throw std::runtime_error(file.string() + ": corrupt header: " + e.what());
    }

    try {
        CheckpointMeta meta;
        meta.case_id = h.at("case").get<int>();
        const auto input = h.at("input").get<std::vector<std::size_t>>();
        if (input.size() != 3)
            throw std::runtime_error("input field must be [channels, height, width]");
        meta.in_channels = input[0];
        meta.in_h = input[1];
        meta.in_w = input[2];
        meta.class_names = h.at("class_names").get<std::vector<std::string>>();
        meta.precision = h.at("precision").get<std::string>();
        meta.epoch = h.at("epoch").get<int>();
        const auto& cfg = h.at("config");
        meta.cfg.epochs = cfg.at("epochs").get<int>();
        meta.cfg.batch_size = cfg.at("batch_size").get<std::size_t>();
        meta.cfg.eta = cfg.at("lr").get<double>();
        meta.cfg.seed = cfg.at("seed").get<std::uint64_t>();
        meta.cfg.deterministic = cfg.at("deterministic").get<bool>();
        meta.cfg.lr_factor = cfg.at("lr_factor").get<double>();
        meta.cfg.lr_patience = cfg.at("lr_patience").get<int>();
        meta.cfg.min_lr = cfg.at("min_lr").get<double>();

        LoadedCheckpoint out;
        out.meta = meta;
        if (meta.precision == "single")
            out.session = load_session<float>(is, h, meta);
        else if (meta.precision == "double")
            out.session = load_session<double>(is, h, meta);
        else
            throw std::runtime_error("unknown precision '" + meta.precision + "'");
        return out;
    } catch (const json::exception& e) {
        throw std::runtime_error(file.string() + ": corrupt header: " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(file.string() + ": " + e.what());
    }
}

}  // namespace fruitnet
