#pragma once

#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "lungseg/dataset.hpp"
#include "lungseg/phantom.hpp"

namespace fixture {

inline std::vector<lungseg::DatasetEntry> phantom_entries(std::size_t n, int size, std::uint64_t first_seed) {
    lungseg::PhantomConfig cfg;
    cfg.size = size;
    std::vector<lungseg::DatasetEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        lungseg::Phantom p = lungseg::generate_phantom(first_seed + i, cfg);
        out.push_back({"ph" + std::to_string(i), std::move(p.image), std::move(p.truth)});
    }
    return out;
}

// Records every index the trainer reads.
class LoggingSource final : public lungseg::EntrySource {
public:
    explicit LoggingSource(const std::vector<lungseg::DatasetEntry>& entries) : entries_(&entries) {}
    std::size_t size() const override { return entries_->size(); }
    const lungseg::DatasetEntry& entry(std::size_t index) const override {
        std::lock_guard lock(mu_);
        touched_.insert(index);
        return entries_->at(index);
    }
    std::set<std::size_t> touched() const {
        std::lock_guard lock(mu_);
        return touched_;
    }

private:
    const std::vector<lungseg::DatasetEntry>* entries_;
    mutable std::mutex mu_;
    mutable std::set<std::size_t> touched_;
};

}  // namespace fixture
