#pragma once

#include <concepts>

#include <cstdint>
#include <string>
#include <vector>

namespace blockcache {

// Minimal CSV emitter with deterministic number formatting (shortest
// round-trip for doubles), so identical runs produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(std::string path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void close();  // flushes; throws std::runtime_error on I/O failure

  static std::string num(double v);
  template <typename T>
    requires std::integral<T>
  static std::string num(T v) {
    return std::to_string(v);
  }

 private:
  std::string path_;
  std::string buffer_;
  std::size_t columns_;
  bool closed_ = false;
};

}  // namespace blockcache
