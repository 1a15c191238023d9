#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fef {

#ifdef FEF_REAL32
using real_t = float;
#else
using real_t = double;
#endif

using Shape = std::vector<int64_t>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void msg_append(std::ostringstream&) {}
template <class T, class... Rest>
void msg_append(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  msg_append(os, rest...);
}
template <class... Args>
std::string msg(const Args&... args) {
  std::ostringstream os;
  msg_append(os, args...);
  return os.str();
}
}  // namespace detail

#define FEF_CHECK(cond, ...)                                \
  do {                                                      \
    if (!(cond)) throw ::fef::Error(::fef::detail::msg(__VA_ARGS__)); \
  } while (0)

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace fef
