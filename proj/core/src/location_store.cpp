#include "wayguard/ingest/store.hpp"

namespace wayguard::ingest {

namespace {
std::string record_key(const LocationFix& fix) {
    return fix.user + "|" + std::to_string(fix.timestamp_ms);
}
}  // namespace

LocationStore::LocationStore(std::filesystem::path dir, std::size_t segment_limit)
    : dir_(std::move(dir)), segment_limit_(segment_limit) {
    std::filesystem::create_directories(dir_);
}

LocationStore::~LocationStore() {
    std::lock_guard lk(mu_);
    if (out_.is_open()) out_.close();
}

void LocationStore::set_write_fault(std::function<bool()> fault) {
    std::lock_guard lk(mu_);
    fault_ = std::move(fault);
}

bool LocationStore::open_segment_locked() {
    if (out_.is_open()) out_.close();
    auto path = dir_ / ("locations-" + std::to_string(seq_) + ".ndjson");
    out_.open(path, std::ios::app);
    in_segment_ = 0;
    return out_.is_open();
}

bool LocationStore::append_batch(std::span<const LocationFix> batch) {
    if (batch.empty()) return true;
    std::lock_guard lk(mu_);
    if (fault_ && !fault_()) return false;
    if (!out_.is_open() && !open_segment_locked()) return false;

    std::vector<std::string> fresh_keys;
    fresh_keys.reserve(batch.size());
    std::string block;
    for (const auto& fix : batch) {
        std::string key = record_key(fix);
        if (seen_.contains(key)) continue;
        block += to_json(fix).dump();
        block.push_back('\n');
        fresh_keys.push_back(std::move(key));
    }
    if (!fresh_keys.empty()) {
        out_ << block;
        out_.flush();
        if (!out_.good()) {
            out_.clear();
            return false;
        }
        for (auto& key : fresh_keys) seen_.insert(std::move(key));
        in_segment_ += fresh_keys.size();
        if (in_segment_ >= segment_limit_) {
            ++seq_;
            if (!open_segment_locked()) return false;
        }
    }
    return true;
}

std::size_t LocationStore::count() const {
    std::lock_guard lk(mu_);
    return seen_.size();
}

std::size_t LocationStore::segments() const {
    std::lock_guard lk(mu_);
    return seq_ + 1;
}

std::vector<LocationFix> LocationStore::user_records(const UserId& user) const {
    std::lock_guard lk(mu_);
    std::vector<LocationFix> out;
    std::unordered_set<std::string> emitted;
    for (std::size_t s = 0; s <= seq_; ++s) {
        auto path = dir_ / ("locations-" + std::to_string(s) + ".ndjson");
        std::ifstream in(path);
        if (!in.is_open()) continue;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::optional<LocationFix> fix;
            try {
                fix = fix_from_json(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception&) {
                continue;
            }
            if (!fix || fix->user != user) continue;
            // Retried batches can leave duplicate lines; report each once.
            if (!emitted.insert(record_key(*fix)).second) continue;
            out.push_back(std::move(*fix));
        }
    }
    return out;
}

}  // namespace wayguard::ingest
