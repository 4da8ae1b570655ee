#include "bgait/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bgait/errors.hpp"

namespace bgait {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_degrees(const std::vector<double>& degrees) {
    std::ostringstream os;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
        if (i) os << ",";
        os << degrees[i];
    }
    return os.str();
}

std::vector<double> parse_degrees(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw ConfigError("empty degree schedule");
    return out;
}

}  // namespace

void PipelineConfig::apply_line(const std::string& raw_line) {
    std::string line = raw_line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected `section.key = value`: " + raw_line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    using Setter = std::function<void(PipelineConfig&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"geometry.width", [](PipelineConfig& c, const std::string& v) { c.geometry.width = std::stoi(v); }},
        {"geometry.height", [](PipelineConfig& c, const std::string& v) { c.geometry.height = std::stoi(v); }},
        {"pca.dim", [](PipelineConfig& c, const std::string& v) { c.pca_dim = std::stoi(v); }},
        {"pca.max_samples", [](PipelineConfig& c, const std::string& v) { c.pca_max_samples = std::stoi(v); }},
        {"keypose.k", [](PipelineConfig& c, const std::string& v) { c.keypose_k = std::stoi(v); }},
        {"keypose.tau_percentile", [](PipelineConfig& c, const std::string& v) { c.tau_percentile = std::stod(v); }},
        {"keypose.kmeans_max_iters", [](PipelineConfig& c, const std::string& v) { c.kmeans_max_iters = std::stoi(v); }},
        {"cvae.d_z", [](PipelineConfig& c, const std::string& v) { c.d_z = std::stoi(v); }},
        {"cvae.lambda1", [](PipelineConfig& c, const std::string& v) { c.lambda1 = std::stod(v); }},
        {"cvae.lambda2", [](PipelineConfig& c, const std::string& v) { c.lambda2 = std::stod(v); }},
        {"cvae.kl_form",
         [](PipelineConfig& c, const std::string& v) {
             if (v != "summed" && v != "standard") throw ConfigError("cvae.kl_form must be summed|standard");
             c.kl_form = v;
         }},
        {"cvae.channels1", [](PipelineConfig& c, const std::string& v) { c.cvae_channels1 = std::stoi(v); }},
        {"cvae.channels2", [](PipelineConfig& c, const std::string& v) { c.cvae_channels2 = std::stoi(v); }},
        {"cvae.channels3", [](PipelineConfig& c, const std::string& v) { c.cvae_channels3 = std::stoi(v); }},
        {"cvae.cond_embed", [](PipelineConfig& c, const std::string& v) { c.cvae_cond_embed = std::stoi(v); }},
        {"cvae.shared_dense", [](PipelineConfig& c, const std::string& v) { c.cvae_shared_dense = std::stoi(v); }},
        {"cvae.epochs", [](PipelineConfig& c, const std::string& v) { c.cvae_train.epochs = std::stoi(v); }},
        {"cvae.learning_rate", [](PipelineConfig& c, const std::string& v) { c.cvae_train.learning_rate = std::stod(v); }},
        {"cvae.batch_size", [](PipelineConfig& c, const std::string& v) { c.cvae_train.batch_size = std::stoi(v); }},
        {"cvae.seed", [](PipelineConfig& c, const std::string& v) { c.cvae_train.seed = std::stoull(v); }},
        {"bilstm.window_len", [](PipelineConfig& c, const std::string& v) { c.window_len = std::stoi(v); }},
        {"bilstm.hidden", [](PipelineConfig& c, const std::string& v) { c.bilstm_hidden = std::stoi(v); }},
        {"bilstm.degree_schedule", [](PipelineConfig& c, const std::string& v) { c.degree_schedule = parse_degrees(v); }},
        {"bilstm.freeze_masks", [](PipelineConfig& c, const std::string& v) { c.freeze_masks = (v == "1" || v == "true"); }},
        {"bilstm.epochs", [](PipelineConfig& c, const std::string& v) { c.bilstm_train.epochs = std::stoi(v); }},
        {"bilstm.learning_rate", [](PipelineConfig& c, const std::string& v) { c.bilstm_train.learning_rate = std::stod(v); }},
        {"bilstm.batch_size", [](PipelineConfig& c, const std::string& v) { c.bilstm_train.batch_size = std::stoi(v); }},
        {"bilstm.seed", [](PipelineConfig& c, const std::string& v) { c.bilstm_train.seed = std::stoull(v); }},
        {"geinet.epochs", [](PipelineConfig& c, const std::string& v) { c.geinet_train.epochs = std::stoi(v); }},
        {"geinet.learning_rate", [](PipelineConfig& c, const std::string& v) { c.geinet_train.learning_rate = std::stod(v); }},
        {"geinet.batch_size", [](PipelineConfig& c, const std::string& v) { c.geinet_train.batch_size = std::stoi(v); }},
        {"geinet.seed", [](PipelineConfig& c, const std::string& v) { c.geinet_train.seed = std::stoull(v); }},
        {"pipeline.seed", [](PipelineConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
    };

    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key: " + key);
    try {
        it->second(*this, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad value for " + key + ": " + value);
    }
}

void PipelineConfig::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write " + file.string());
    out << "geometry.width = " << geometry.width << "\n";
    out << "geometry.height = " << geometry.height << "\n";
    out << "pca.dim = " << pca_dim << "\n";
    out << "pca.max_samples = " << pca_max_samples << "\n";
    out << "keypose.k = " << keypose_k << "\n";
    out << "keypose.tau_percentile = " << tau_percentile << "\n";
    out << "keypose.kmeans_max_iters = " << kmeans_max_iters << "\n";
    out << "cvae.d_z = " << d_z << "\n";
    out << "cvae.lambda1 = " << lambda1 << "\n";
    out << "cvae.lambda2 = " << lambda2 << "\n";
    out << "cvae.kl_form = " << kl_form << "\n";
    out << "cvae.channels1 = " << cvae_channels1 << "\n";
    out << "cvae.channels2 = " << cvae_channels2 << "\n";
    out << "cvae.channels3 = " << cvae_channels3 << "\n";
    out << "cvae.cond_embed = " << cvae_cond_embed << "\n";
    out << "cvae.shared_dense = " << cvae_shared_dense << "\n";
    out << "cvae.epochs = " << cvae_train.epochs << "\n";
    out << "cvae.learning_rate = " << cvae_train.learning_rate << "\n";
    out << "cvae.batch_size = " << cvae_train.batch_size << "\n";
    out << "cvae.seed = " << cvae_train.seed << "\n";
    out << "bilstm.window_len = " << window_len << "\n";
    out << "bilstm.hidden = " << bilstm_hidden << "\n";
    out << "bilstm.degree_schedule = " << format_degrees(degree_schedule) << "\n";
    out << "bilstm.freeze_masks = " << (freeze_masks ? 1 : 0) << "\n";
    out << "bilstm.epochs = " << bilstm_train.epochs << "\n";
    out << "bilstm.learning_rate = " << bilstm_train.learning_rate << "\n";
    out << "bilstm.batch_size = " << bilstm_train.batch_size << "\n";
    out << "bilstm.seed = " << bilstm_train.seed << "\n";
    out << "geinet.epochs = " << geinet_train.epochs << "\n";
    out << "geinet.learning_rate = " << geinet_train.learning_rate << "\n";
    out << "geinet.batch_size = " << geinet_train.batch_size << "\n";
    out << "geinet.seed = " << geinet_train.seed << "\n";
    out << "pipeline.seed = " << seed << "\n";
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read " + file.string());
    PipelineConfig cfg;
    std::string line;
    while (std::getline(in, line)) cfg.apply_line(line);
    return cfg;
}

}  // namespace bgait
