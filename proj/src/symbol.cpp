#include "iggp/symbol.hpp"

#include <deque>
#include <mutex>
#include <unordered_map>

namespace iggp {
namespace {

struct InternTable {
  std::mutex mutex;
  std::deque<std::string> texts;  // deque: stable addresses across growth
  std::unordered_map<std::string_view, uint32_t> ids;

  InternTable() {
    texts.emplace_back("");  // id 0 is the empty symbol
    ids.emplace(texts.back(), 0);
  }
};

InternTable& table() {
  static InternTable t;
  return t;
}

}  // namespace

Symbol Symbol::intern(std::string_view text) {
  InternTable& t = table();
  std::lock_guard<std::mutex> lock(t.mutex);
  auto it = t.ids.find(text);
  if (it != t.ids.end()) return Symbol(it->second);
  t.texts.emplace_back(text);
  uint32_t id = static_cast<uint32_t>(t.texts.size() - 1);
  t.ids.emplace(t.texts.back(), id);
  return Symbol(id);
}

const std::string& Symbol::text() const {
  // Entries are append-only and never move, so reading by index only needs
  // the lock to synchronize with a concurrent append.
  InternTable& t = table();
  std::lock_guard<std::mutex> lock(t.mutex);
  return t.texts[id_];
}

bool text_less(Symbol a, Symbol b) {
  if (a == b) return false;
  return a.text() < b.text();
}

}  // namespace iggp
