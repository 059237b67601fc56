#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sss/core_types.hpp"

namespace sss {

/// Per-node exclusive/shared key locks. Acquisition is all-or-nothing so a
/// transaction never holds a partial lock set while waiting.
class LockTable {
 public:
  struct Record {
    std::optional<TxnId> exclusive;
    std::set<TxnId> shared;
  };

  /// A key appearing in both lists is locked exclusively only.
  bool try_acquire(const TxnId& txn, const std::vector<Key>& exclusive,
                   const std::vector<Key>& shared) {
    for (Key k : exclusive) {
      auto it = locks_.find(k);
      if (it == locks_.end()) continue;
      const Record& r = it->second;
      if (r.exclusive && *r.exclusive != txn) return false;
      for (const auto& s : r.shared) {
        if (s != txn) return false;
      }
    }
    for (Key k : shared) {
      auto it = locks_.find(k);
      if (it != locks_.end() && it->second.exclusive && *it->second.exclusive != txn) return false;
    }
    for (Key k : exclusive) {
      Record& r = locks_[k];
      r.shared.erase(txn);
      r.exclusive = txn;
      held_[txn].insert(k);
    }
    for (Key k : shared) {
      Record& r = locks_[k];
      if (r.exclusive == txn) continue;
      r.shared.insert(txn);
      held_[txn].insert(k);
    }
    return true;
  }

  void release(const TxnId& txn) {
    auto it = held_.find(txn);
    if (it == held_.end()) return;
    for (Key k : it->second) {
      auto lk = locks_.find(k);
      if (lk == locks_.end()) continue;
      if (lk->second.exclusive == txn) lk->second.exclusive.reset();
      lk->second.shared.erase(txn);
      if (!lk->second.exclusive && lk->second.shared.empty()) locks_.erase(lk);
    }
    held_.erase(it);
  }

  bool holds_any(const TxnId& txn) const { return held_.count(txn) != 0; }
  bool empty() const { return locks_.empty() && held_.empty(); }
  const Record* find(Key k) const {
    auto it = locks_.find(k);
    return it == locks_.end() ? nullptr : &it->second;
  }

  /// No key has both an exclusive holder and shared holders.
  bool well_formed() const {
    for (const auto& [k, r] : locks_) {
      if (r.exclusive && !r.shared.empty()) return false;
    }
    return true;
  }

 private:
  std::map<Key, Record> locks_;
  std::map<TxnId, std::set<Key>> held_;
};

}  // namespace sss
