#include "anscale/ensemble_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "anscale/error.hpp"

namespace anscale {
namespace {

constexpr std::array<char, 4> kMagic{'A', 'N', 'S', 'C'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw Error(Errc::format, "truncated ensemble file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

// Doubles go through a byte buffer in blocks so large ensembles avoid one
// stream call per value.
void put_doubles_le(std::ostream& out, std::span<const double> values) {
  constexpr std::size_t kBlock = 1 << 15;
  std::vector<char> buf;
  for (std::size_t start = 0; start < values.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, values.size() - start);
    buf.resize(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(values[start + i]);
      for (std::size_t b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

void get_doubles_le(std::istream& in, std::span<double> values) {
  constexpr std::size_t kBlock = 1 << 15;
  std::vector<unsigned char> buf;
  for (std::size_t start = 0; start < values.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, values.size() - start);
    buf.resize(n * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw Error(Errc::format, "truncated ensemble payload");
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
      values[start + i] = std::bit_cast<double>(bits);
    }
  }
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

void write_ensemble_binary(std::ostream& out, const PathEnsemble& ensemble) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kEnsembleFormatVersion);
  put_le<std::uint64_t>(out, ensemble.n_paths());
  put_le<std::uint64_t>(out, ensemble.n_steps());
  put_doubles_le(out, ensemble.increments());

  const nlohmann::json trailer{{"descriptor", ensemble.descriptor()},
                               {"master_seed", ensemble.master_seed()}};
  const std::string blob = trailer.dump();
  put_le<std::uint64_t>(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(Errc::io, "failed writing ensemble");
}

PathEnsemble read_ensemble_binary(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(Errc::format, "missing ANSC magic bytes");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kEnsembleFormatVersion) {
    throw Error(Errc::format, "unsupported ensemble format version " + std::to_string(version));
  }
  const auto n_paths = get_le<std::uint64_t>(in);
  const auto n_steps = get_le<std::uint64_t>(in);
  if (n_paths == 0 || n_steps == 0 || n_steps > (std::uint64_t{1} << 40) / n_paths) {
    throw Error(Errc::format, "implausible ensemble dimensions");
  }
  std::vector<double> data(n_paths * n_steps);
  get_doubles_le(in, data);

  const auto len = get_le<std::uint64_t>(in);
  if (len > (std::uint64_t{1} << 30)) throw Error(Errc::format, "implausible trailer length");
  std::string blob(len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(Errc::format, "truncated ensemble trailer");

  nlohmann::json trailer;
  try {
    trailer = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::format, std::string("bad ensemble trailer: ") + e.what());
  }
  return PathEnsemble(n_paths, n_steps, std::move(data),
                      trailer.value("descriptor", std::string{}),
                      trailer.value("master_seed", std::uint64_t{0}));
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble) {
  for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
    const auto row = ensemble.row(p);
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (t) out << ',';
      out << format_double(row[t]);
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::io, "failed writing ensemble CSV");
}

PathEnsemble read_ensemble_csv(std::istream& in) {
  std::vector<double> data;
  std::size_t n_steps = 0;
  std::size_t n_paths = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      // skip leading blanks; from_chars rejects them
      while (p < comma && (*p == ' ' || *p == '\t')) ++p;
      auto [ptr, ec] = std::from_chars(p, comma, v);
      if (ec != std::errc{}) {
        throw Error(Errc::format, "bad number on CSV line " + std::to_string(line_no));
      }
      data.push_back(v);
      ++count;
      p = comma + 1;
      if (comma == end) break;
    }
    if (n_paths == 0) n_steps = count;
    if (count != n_steps) {
      throw Error(Errc::format, "CSV line " + std::to_string(line_no) + " has " +
                                    std::to_string(count) + " values, expected " +
                                    std::to_string(n_steps));
    }
    ++n_paths;
  }
  if (n_paths == 0) throw Error(Errc::empty_input, "CSV ensemble has no rows");
  return PathEnsemble(n_paths, n_steps, std::move(data));
}

void save_ensemble(const std::filesystem::path& path, const PathEnsemble& ensemble) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  const auto ext = path.extension().string();
  if (ext == ".csv") {
    write_ensemble_csv(out, ensemble);
  } else {
    write_ensemble_binary(out, ensemble);
  }
}

PathEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  const bool binary = in.gcount() == 4 && magic == kMagic;
  in.clear();
  in.seekg(0);
  return binary ? read_ensemble_binary(in) : read_ensemble_csv(in);
}

}  // namespace anscale
