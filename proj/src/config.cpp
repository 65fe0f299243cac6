#include "ufp/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace ufp {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw InvalidConfig(where + ": expected an object");
}

// Strict-section helper: every key must be consumed by one of the handlers.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        require_object(j_, name_);
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                out = it->get<T>();
            } catch (const json::exception& e) {
                throw InvalidConfig(name_ + "." + key + ": " + e.what());
            }
            seen_.insert(key);
        }
    }

    const json* sub(const char* key) {
        if (auto it = j_.find(key); it != j_.end()) {
            seen_.insert(key);
            return &*it;
        }
        return nullptr;
    }

    // Call after consuming every expected key.
    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw InvalidConfig(name_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

FaultSpec parse_fault_spec(const json& j, const std::string& where) {
    FaultSpec spec;
    Section s(j, where);
    std::string kind = "bit_flip", site = "weights", selector = "backbone";
    s.get("kind", kind);
    s.get("site", site);
    s.get("selector", selector);
    s.get("rate", spec.rate);
    s.get("k", spec.bit_width);
    s.get("target_state", spec.target_state);
    s.get("seed", spec.seed);
    s.done();
    spec.kind = fault_kind_from_string(kind);
    spec.site = fault_site_from_string(site);
    spec.selector = layer_selector_from_string(selector);
    spec.validate();
    return spec;
}

} // namespace

void ExperimentConfig::validate() const {
    train.validate();
    if (dataset.kind != "blobs" && dataset.kind != "moons" && dataset.kind != "idx") {
        throw InvalidConfig("dataset.kind must be blobs, moons, or idx");
    }
    if (dataset.kind == "idx" &&
        (dataset.train_images.empty() || dataset.train_labels.empty() ||
         dataset.val_images.empty() || dataset.val_labels.empty())) {
        throw InvalidConfig("dataset.kind=idx requires train/val image and label paths");
    }
    if (!(detector.q_low > 0.0 && detector.q_high < 1.0 && detector.q_low < detector.q_high)) {
        throw InvalidConfig("detector: need 0 < q_low < q_high < 1");
    }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("config: not valid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    Section root(doc, "config");

    if (const json* j = root.sub("dataset")) {
        Section s(*j, "dataset");
        s.get("kind", cfg.dataset.kind);
        s.get("n_train", cfg.dataset.n_train);
        s.get("n_val", cfg.dataset.n_val);
        s.get("classes", cfg.dataset.classes);
        s.get("noise", cfg.dataset.noise);
        std::vector<std::size_t> shape;
        s.get("blob_shape", shape);
        if (!shape.empty()) cfg.dataset.blob_shape = shape;
        s.get("train_images", cfg.dataset.train_images);
        s.get("train_labels", cfg.dataset.train_labels);
        s.get("val_images", cfg.dataset.val_images);
        s.get("val_labels", cfg.dataset.val_labels);
        s.done();
    }
    if (const json* j = root.sub("topology")) {
        Section s(*j, "topology");
        s.get("name", cfg.topology.name);
        s.get("uncertainty_width", cfg.topology.uncertainty_width);
        s.done();
    }
    if (const json* j = root.sub("train")) {
        Section s(*j, "train");
        s.get("epochs_stage1", cfg.train.epochs_stage1);
        s.get("epochs_stage2", cfg.train.epochs_stage2);
        s.get("batch_size", cfg.train.batch_size);
        s.get("learning_rate", cfg.train.learning_rate);
        s.get("alpha", cfg.train.alpha);
        s.get("seed", cfg.train.seed);
        s.get("augment_stage1", cfg.train.augment_stage1);
        std::string opt = "adam";
        s.get("optimizer", opt);
        s.done();
        cfg.train.optimizer = optimizer_from_string(opt);
    }
    if (const json* j = root.sub("faults")) {
        if (!j->is_array()) throw InvalidConfig("faults: expected an array");
        for (std::size_t i = 0; i < j->size(); ++i) {
            cfg.faults.push_back(parse_fault_spec((*j)[i], "faults[" + std::to_string(i) + "]"));
        }
    }
    if (const json* j = root.sub("campaign")) {
        Section s(*j, "campaign");
        s.get("rates", cfg.campaign.fault_rates);
        s.get("runs_per_rate", cfg.campaign.runs_per_rate);
        s.get("nonfunctional_drop", cfg.campaign.nonfunctional_drop);
        s.get("base_seed", cfg.campaign.base_seed);
        s.get("workers", cfg.campaign.parallel_workers);
        std::string stat = "fingerprint";
        s.get("statistic", stat);
        s.done();
        if (stat == "fingerprint") {
            cfg.campaign.statistic = DetectorStat::fingerprint;
        } else if (stat == "max_logit") {
            cfg.campaign.statistic = DetectorStat::max_logit;
        } else {
            throw InvalidConfig("campaign.statistic must be fingerprint or max_logit");
        }
    }
    if (cfg.campaign.fault_rates.empty()) {
        cfg.campaign.fault_rates = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
    }
    if (const json* j = root.sub("detector")) {
        Section s(*j, "detector");
        s.get("q_low", cfg.detector.q_low);
        s.get("q_high", cfg.detector.q_high);
        s.get("z_threshold", cfg.detector.z_threshold);
        s.done();
    }
    if (const json* j = root.sub("output")) {
        Section s(*j, "output");
        s.get("dir", cfg.output.dir);
        s.done();
    }

    root.done();
    cfg.campaign.specs_template = cfg.faults;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text);
}

std::string fault_spec_to_json(const FaultSpec& spec) {
    const json doc{{"kind", fault_kind_name(spec.kind)},
                   {"site", fault_site_name(spec.site)},
                   {"selector", layer_selector_name(spec.selector)},
                   {"rate", spec.rate},
                   {"k", spec.bit_width},
                   {"target_state", spec.target_state},
                   {"seed", spec.seed}};
    return doc.dump();
}

FaultSpec fault_spec_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("fault spec: not valid JSON: ") + e.what());
    }
    return parse_fault_spec(doc, "fault_spec");
}

namespace {

// Synthetic train/validation sets must share one distribution (same blob
// centers), so one generator call is partitioned into the two sets.
std::pair<Dataset, Dataset> build_synthetic_pair(const ExperimentConfig& cfg) {
    const DatasetConfig& d = cfg.dataset;
    const std::uint64_t seed = derive_seed(cfg.train.seed, 1);
    const std::size_t total = d.n_train + d.n_val;
    Dataset pool = d.kind == "blobs"
                       ? make_synthetic_blobs(total, d.classes, d.noise, seed, d.blob_shape)
                       : make_synthetic(SyntheticKind::moons, total, d.classes, d.noise, seed);
    return partition_dataset(pool, d.n_train);
}

} // namespace

Dataset build_train_dataset(const ExperimentConfig& cfg) {
    const DatasetConfig& d = cfg.dataset;
    if (d.kind == "idx") return load_idx(d.train_images, d.train_labels);
    return build_synthetic_pair(cfg).first;
}

Dataset build_val_dataset(const ExperimentConfig& cfg) {
    const DatasetConfig& d = cfg.dataset;
    if (d.kind == "idx") return load_idx(d.val_images, d.val_labels);
    return build_synthetic_pair(cfg).second;
}

} // namespace ufp
