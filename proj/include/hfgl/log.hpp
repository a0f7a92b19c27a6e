#pragma once

#include <cstdio>
#include <utility>

namespace hfgl {

/// 0 = silent, 1 = per-step progress, 2 = solver detail.
int& log_level();

inline void log_at(int level, const char* msg) {
  if (log_level() < level) return;
  std::fputs(msg, stderr);
  std::fputc('\n', stderr);
}

template <class... Args>
void log_at(int level, const char* fmt, Args&&... args) {
  if (log_level() < level) return;
  std::fprintf(stderr, fmt, std::forward<Args>(args)...);
  std::fputc('\n', stderr);
}

}  // namespace hfgl
