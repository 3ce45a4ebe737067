// Test-only tic-tac-toe minimax oracle over a 9-char board.
#pragma once

#include <array>
#include <vector>

namespace iggp::testing {

using TttBoard = std::array<char, 9>;  // 'x', 'o', '.'

inline char ttt_winner(const TttBoard& b) {
  static const int lines[8][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6},
                                  {1, 4, 7}, {2, 5, 8}, {0, 4, 8}, {2, 4, 6}};
  for (const auto& line : lines)
    if (b[line[0]] != '.' && b[line[0]] == b[line[1]] && b[line[1]] == b[line[2]])
      return b[line[0]];
  return '.';
}

// Value for the player to move: +1 win, 0 draw, -1 loss.
inline int ttt_minimax(TttBoard& b, char to_move) {
  char w = ttt_winner(b);
  if (w != '.') return w == to_move ? 1 : -1;
  bool full = true;
  for (char c : b)
    if (c == '.') full = false;
  if (full) return 0;
  char other = to_move == 'x' ? 'o' : 'x';
  int best = -2;
  for (int i = 0; i < 9; ++i) {
    if (b[i] != '.') continue;
    b[i] = to_move;
    int v = -ttt_minimax(b, other);
    b[i] = '.';
    if (v > best) best = v;
  }
  return best;
}

// Squares whose move does not lose for `to_move` under optimal play.
inline std::vector<int> ttt_non_losing_moves(TttBoard b, char to_move) {
  char other = to_move == 'x' ? 'o' : 'x';
  std::vector<int> out;
  for (int i = 0; i < 9; ++i) {
    if (b[i] != '.') continue;
    b[i] = to_move;
    int v = -ttt_minimax(b, other);
    b[i] = '.';
    if (v >= 0) out.push_back(i);
  }
  return out;
}

}  // namespace iggp::testing
