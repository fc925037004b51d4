#include "svc/config.hpp"

#include <fstream>
#include <sstream>

#include "svc/errors.hpp"

namespace svc {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double to_number(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) { return int(to_number(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(to_int(key, part));
    }
    if (out.empty()) throw ValidationError("config: empty list for " + key);
    return out;
}

}  // namespace

TrainConfig parse_run_config_text(const std::string& text) {
    TrainConfig cfg;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(lineno) + " is not key=value: '" + line +
                                  "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError("config: empty key on line " + std::to_string(lineno));

        if (key == "seed") cfg.seed = uint64_t(to_number(key, val));
        else if (key == "steps") cfg.steps = to_int(key, val);
        else if (key == "batch_size") cfg.batch_size = to_int(key, val);
        else if (key == "segment_frames") cfg.segment_frames = to_int(key, val);
        else if (key == "learning_rate") cfg.learning_rate = to_number(key, val);
        else if (key == "adam_beta1") cfg.adam_beta1 = to_number(key, val);
        else if (key == "adam_beta2") cfg.adam_beta2 = to_number(key, val);
        else if (key == "adam_eps") cfg.adam_eps = to_number(key, val);
        else if (key == "alpha") cfg.weights.alpha = to_number(key, val);
        else if (key == "beta") cfg.weights.beta = to_number(key, val);
        else if (key == "gamma") cfg.weights.gamma = to_number(key, val);
        else if (key == "w_adv") cfg.weights.w_adv = to_number(key, val);
        else if (key == "w_fmap") cfg.weights.w_fmap = to_number(key, val);
        else if (key == "dis_orientation") {
            if (val == "lsgan") cfg.orientation = DisOrientation::Lsgan;
            else if (val == "as_printed") cfg.orientation = DisOrientation::AsPrinted;
            else throw ValidationError("config: dis_orientation must be lsgan or as_printed, got '" + val + "'");
        }
        else if (key == "freeze_speaker") cfg.freeze_speaker = to_bool(key, val);
        else if (key == "checkpoint_interval") cfg.checkpoint_interval = to_int(key, val);
        else if (key == "f0_min") cfg.f0_min = to_number(key, val);
        else if (key == "f0_max") cfg.f0_max = to_number(key, val);
        else if (key == "content_provider") {
            if (val == "synthetic") {
                cfg.content.provider = ContentSpec::Provider::Synthetic;
            } else if (val.rfind("file:", 0) == 0) {
                cfg.content.provider = ContentSpec::Provider::File;
                cfg.content.file_path = val.substr(5);
            } else {
                throw ValidationError("config: content_provider must be synthetic or file:PATH, got '" + val +
                                      "'");
            }
        }
        else if (key == "content_seed") cfg.content.seed = uint64_t(to_number(key, val));
        else if (key == "content_dim") cfg.content.dim = to_int(key, val);
        else if (key == "compression") {
            if (val == "none") cfg.content.compression = ContentSpec::Compression::None;
            else if (val == "kmeans") cfg.content.compression = ContentSpec::Compression::KMeans;
            else if (val == "rvq") cfg.content.compression = ContentSpec::Compression::Rvq;
            else throw ValidationError("config: compression must be none, kmeans or rvq, got '" + val + "'");
        }
        else if (key == "quant_mode") {
            if (val == "tensor") cfg.content.mode = QuantMode::Tensor;
            else if (val == "codes") cfg.content.mode = QuantMode::Codes;
            else throw ValidationError("config: quant_mode must be tensor or codes, got '" + val + "'");
        }
        else if (key == "kmeans_k") cfg.content.kmeans_k = to_int(key, val);
        else if (key == "rvq_stages") cfg.content.rvq_stages = to_int(key, val);
        else if (key == "codes_per_stage") cfg.content.codes_per_stage = to_int(key, val);
        else if (key == "fit_iters") cfg.content.fit_iters = to_int(key, val);
        else if (key == "sample_rate") cfg.spectro.sample_rate = to_int(key, val);
        else if (key == "n_fft") cfg.spectro.n_fft = to_int(key, val);
        else if (key == "hop") cfg.spectro.hop = to_int(key, val);
        else if (key == "win_length") cfg.spectro.win_length = to_int(key, val);
        else if (key == "n_mels") cfg.spectro.n_mels = to_int(key, val);
        else if (key == "fmin") cfg.spectro.fmin = to_number(key, val);
        else if (key == "fmax") cfg.spectro.fmax = to_number(key, val);
        else if (key == "d_z") cfg.model.d_z = to_int(key, val);
        else if (key == "hidden") cfg.model.hidden = to_int(key, val);
        else if (key == "spk_dim") cfg.model.spk_dim = to_int(key, val);
        else if (key == "pitch_bins") cfg.model.pitch_bins = to_int(key, val);
        else if (key == "pitch_embed_dim") cfg.model.pitch_embed_dim = to_int(key, val);
        else if (key == "dec_ch") cfg.model.dec_ch = to_int(key, val);
        else if (key == "flow_blocks") cfg.model.flow_blocks = to_int(key, val);
        else if (key == "flow_hidden") cfg.model.flow_hidden = to_int(key, val);
        else if (key == "upsample") cfg.model.upsample = to_int_list(key, val);
        else if (key == "periods") cfg.model.periods = to_int_list(key, val);
        else if (key == "scales") cfg.model.scales = to_int_list(key, val);
        else throw ValidationError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

TrainConfig parse_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str());
}

}  // namespace svc
