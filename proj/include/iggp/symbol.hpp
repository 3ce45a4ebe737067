// Interned lower-case symbols shared by every module.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace iggp {

// A Symbol is an index into a process-wide intern table. Comparison and
// hashing are O(1) on the index; the index order is the interning order,
// not the lexicographic one (use text_less for canonical ordering).
class Symbol {
 public:
  Symbol() : id_(0) {}

  static Symbol intern(std::string_view text);
  const std::string& text() const;

  uint32_t id() const { return id_; }
  bool operator==(const Symbol& o) const { return id_ == o.id_; }
  bool operator!=(const Symbol& o) const { return id_ != o.id_; }
  // Fast arbitrary-but-stable order for in-run containers.
  bool operator<(const Symbol& o) const { return id_ < o.id_; }

 private:
  explicit Symbol(uint32_t id) : id_(id) {}
  uint32_t id_;
};

// Lexicographic order on the interned text; use wherever output order
// must be reproducible across runs.
bool text_less(Symbol a, Symbol b);

}  // namespace iggp

template <>
struct std::hash<iggp::Symbol> {
  size_t operator()(const iggp::Symbol& s) const noexcept {
    return std::hash<uint32_t>()(s.id());
  }
};
