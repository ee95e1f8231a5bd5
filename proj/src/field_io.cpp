#include "cbvf/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cbvf/errors.hpp"

namespace cbvf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(bits);
  return bits;
}

}  // namespace

void write_field(const fs::path& dir, const ValueField& field) {
  fs::create_directories(dir);
  const Grid& g = field.grid;
  json meta;
  meta["dim"] = g.dim();
  meta["counts"] = g.counts();
  meta["lo"] = g.lo();
  meta["hi"] = g.hi();
  std::vector<bool> periodic = g.periodic();
  meta["periodic"] = periodic;
  meta["time"] = field.time;
  meta["axis_names"] = g.axis_names();
  meta["ordering"] = "row-major";
  meta["dtype"] = "float64-le";

  std::ofstream meta_out(dir / "meta.json");
  if (!meta_out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
  meta_out << meta.dump(2) << '\n';

  std::ofstream out(dir / "values.f64", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "values.f64").string());
  for (double v : field.values) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw std::runtime_error("short write to " + (dir / "values.f64").string());
}

ValueField read_field(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw ConfigError("cannot open " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
  Grid grid(meta.at("lo").get<std::vector<double>>(), meta.at("hi").get<std::vector<double>>(),
            meta.at("counts").get<std::vector<std::size_t>>(),
            meta.at("periodic").get<std::vector<bool>>(),
            meta.value("axis_names", std::vector<std::string>{}));
  if (meta.at("dim").get<std::size_t>() != grid.dim()) {
    throw ConfigError("meta.json dim disagrees with axis arrays");
  }

  const fs::path values_path = dir / "values.f64";
  std::ifstream in(values_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + values_path.string());
  const auto bytes = fs::file_size(values_path);
  if (bytes != grid.size() * sizeof(double)) {
    throw ConfigError(values_path.string() + " holds " + std::to_string(bytes) +
                      " bytes, expected " + std::to_string(grid.size() * sizeof(double)));
  }
  std::vector<double> values(grid.size());
  for (double& v : values) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    v = std::bit_cast<double>(to_little_endian(bits));
  }
  return ValueField(std::move(grid), std::move(values), meta.at("time").get<double>());
}

}  // namespace cbvf
