#ifndef FTL_VERSION_HPP
#define FTL_VERSION_HPP

namespace ftl {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportFormatVersion = 1;

}  // namespace ftl

#endif  // FTL_VERSION_HPP
