#ifndef CTRAK_STORE_HPP
#define CTRAK_STORE_HPP

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "ctrak/checksum.hpp"
#include "ctrak/common.hpp"

namespace ctrak {

// One projected, per-sample training gradient as stored on disk.
struct ProjectedGradientRecord {
    std::uint64_t sample_id = 0;
    std::uint8_t loss_kind = 0;
    std::uint32_t n_timesteps = 0;
    float norm_pre_projection = 0.0f;
    std::vector<float> g_proj;
};

struct StoreHeader {
    std::uint32_t version = 1;
    std::uint32_t k = 0;
    std::uint64_t count = 0;
    std::uint64_t projector_seed = 0;
    Fingerprint fingerprint;
};

// Append-only writer for the "CTGS" gradient store. Records are flushed as
// they are appended; finalize() patches the record count into the header and
// writes the CRC64 footer over the record region.
class GradientStoreWriter {
public:
    GradientStoreWriter(const std::string& path, std::uint32_t k, std::uint64_t projector_seed,
                        const Fingerprint& fingerprint);
    ~GradientStoreWriter();

    void append(const ProjectedGradientRecord& rec);
    void finalize();
    std::uint64_t count() const { return count_; }

private:
    std::string path_;
    std::ofstream file_;
    std::uint32_t k_;
    std::uint64_t count_ = 0;
    Crc64 crc_;
    std::unordered_set<std::uint64_t> seen_ids_;
    bool finalized_ = false;
};

class GradientStoreReader {
public:
    explicit GradientStoreReader(const std::string& path);

    const StoreHeader& header() const { return header_; }
    // Streams records in file order while validating the footer CRC.
    void for_each(const std::function<void(const ProjectedGradientRecord&)>& fn);
    std::vector<ProjectedGradientRecord> read_all();

private:
    std::string path_;
    StoreHeader header_;
    std::streamoff body_begin_ = 0;
};

}  // namespace ctrak

#endif
