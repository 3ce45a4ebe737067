// Test-only eight-puzzle oracle over a direct board encoding (0 = blank),
// independent of the GDL machinery: BFS gives provably optimal depths.
#pragma once

#include <array>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "iggp/game.hpp"

namespace iggp::testing {

using Board = std::array<int, 9>;  // row-major, 0 is the blank

inline Board solved_board() { return {1, 2, 3, 4, 5, 6, 7, 8, 0}; }

inline uint32_t board_key(const Board& b) {
  uint32_t k = 0;
  for (int v : b) k = k * 9 + static_cast<uint32_t>(v);
  return k;
}

inline std::vector<Board> board_successors(const Board& b) {
  int blank = 0;
  while (b[blank] != 0) ++blank;
  int br = blank / 3, bc = blank % 3;
  std::vector<Board> out;
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  for (int d = 0; d < 4; ++d) {
    int r = br + dr[d], c = bc + dc[d];
    if (r < 0 || r > 2 || c < 0 || c > 2) continue;
    Board next = b;
    std::swap(next[blank], next[r * 3 + c]);
    out.push_back(next);
  }
  return out;
}

// Optimal distance to the solved board, or nullopt when unreachable.
inline std::optional<int> bfs_optimal_depth(const Board& start) {
  Board goal = solved_board();
  if (start == goal) return 0;
  std::unordered_map<uint32_t, int> dist;
  std::deque<Board> queue{start};
  dist[board_key(start)] = 0;
  while (!queue.empty()) {
    Board cur = queue.front();
    queue.pop_front();
    int d = dist[board_key(cur)];
    for (const Board& next : board_successors(cur)) {
      auto [it, fresh] = dist.emplace(board_key(next), d + 1);
      if (!fresh) continue;
      if (next == goal) return d + 1;
      queue.push_back(next);
    }
  }
  return std::nullopt;
}

// GDL state for a board at step 0 (matches games/eightpuzzle.gdl's fluents).
inline GameState board_state(const Board& b) {
  std::vector<GroundAtom> fluents;
  const Symbol kCell = Symbol::intern("true_cell");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      int tile = b[r * 3 + c];
      fluents.push_back(GroundAtom{
          kCell,
          {Symbol::intern(std::to_string(r + 1)),
           Symbol::intern(std::to_string(c + 1)),
           tile == 0 ? Symbol::intern("b") : Symbol::intern(std::to_string(tile))}});
    }
  fluents.push_back(GroundAtom{Symbol::intern("true_step"), {Symbol::intern("0")}});
  GameState s;
  s.fluents = FactSet::from(std::move(fluents));
  s.step = 0;
  return s;
}

// A solvable board exactly `walk` random slides away from solved (optimal
// depth is therefore at most `walk`).
inline Board scrambled_board(int walk, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Board b = solved_board();
  for (int i = 0; i < walk; ++i) {
    auto succ = board_successors(b);
    b = succ[rng() % succ.size()];
  }
  return b;
}

}  // namespace iggp::testing
