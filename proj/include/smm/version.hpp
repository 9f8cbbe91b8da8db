#pragma once

namespace smm {

inline const char* version_string() {
#ifdef SMM_GIT_DESCRIBE
  return SMM_GIT_DESCRIBE;
#else
  return "unknown";
#endif
}

}  // namespace smm
