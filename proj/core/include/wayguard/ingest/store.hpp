#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <span>
#include <unordered_set>
#include <vector>

#include "wayguard/types.hpp"

namespace wayguard::ingest {

/// Append-only location record log: one JSON object per line, segmented
/// into `locations-{seq}.ndjson` files. Writes are de-duplicated on
/// (user, timestamp) so retried batches are idempotent; count() is the
/// number of distinct records persisted.
class LocationStore {
public:
    explicit LocationStore(std::filesystem::path dir,
                           std::size_t segment_limit = 100'000);
    ~LocationStore();

    /// Appends one batch atomically with respect to other appends.
    /// Returns false (persisting nothing new) when a write fails.
    bool append_batch(std::span<const LocationFix> batch);

    std::size_t count() const;
    std::size_t segments() const;

    /// All persisted fixes of one user, in append order.
    std::vector<LocationFix> user_records(const UserId& user) const;

    /// Test hook: invoked before each batch write; returning false makes
    /// the write fail.
    void set_write_fault(std::function<bool()> fault);

    const std::filesystem::path& directory() const { return dir_; }

private:
    bool open_segment_locked();
    static std::uint64_t dedup_key(const LocationFix& fix);

    std::filesystem::path dir_;
    std::size_t segment_limit_;

    mutable std::mutex mu_;
    std::ofstream out_;
    std::size_t seq_ = 0;
    std::size_t in_segment_ = 0;
    std::unordered_set<std::string> seen_;
    std::function<bool()> fault_;
};

}  // namespace wayguard::ingest
