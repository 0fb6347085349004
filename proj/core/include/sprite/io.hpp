#ifndef SPRITE_IO_HPP
#define SPRITE_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "sprite/estimation.hpp"
#include "sprite/image.hpp"
#include "sprite/solvers.hpp"

namespace sprite {

// Stack file contents: one or more planes plus optional per-exposure header
// metadata (FITS keywords SIGMA<k>/FLUX<k>, 1-based, override estimation).
struct CubeFile {
  std::vector<Image> planes;
  std::vector<double> sigmas;  // empty when absent
  std::vector<double> fluxes;
};

// FITS primary HDU, BITPIX -32/-64, NAXIS 2 or 3, optional BSCALE/BZERO.
CubeFile read_fits(const std::string& path);
void write_fits_image(const std::string& path, const Image& image);
void write_fits_cube(const std::string& path, const std::vector<Image>& planes,
                     const std::vector<double>& sigmas = {},
                     const std::vector<double>& fluxes = {});

// Dependency-free fallback: 8 little-endian int64 header
// {magic 'SPRL', version, n, height, width, 0, 0, 0} then n*height*width
// little-endian float64 in row-major order, exposure-major.
CubeFile read_raw(const std::string& path);
void write_raw(const std::string& path, const std::vector<Image>& planes);

// Dispatch on the file's magic bytes (FITS "SIMPLE" or the raw magic).
CubeFile read_stack_file(const std::string& path);

// Text artifacts. Writes are atomic (temp file + rename).
void write_report(const std::string& path, const EstimationReport& report,
                  const SolveDiagnostics& diag);
void write_sidecar(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::pair<std::string, std::string>> read_key_values(
    const std::string& path);

void atomic_write_bytes(const std::string& path, const std::string& bytes);

}  // namespace sprite

#endif
