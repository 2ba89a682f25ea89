#include "ctrak/store.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

namespace ctrak {

namespace {

constexpr char kMagic[4] = {'C', 'T', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
// magic + version + k + count + seed + fingerprint
constexpr std::streamoff kHeaderSize = 4 + 4 + 4 + 8 + 8 + 16;
constexpr std::streamoff kCountOffset = 4 + 4 + 4;

std::size_t record_size(std::uint32_t k) {
    return 8 + 1 + 4 + 4 + static_cast<std::size_t>(k) * 4;
}

void serialize_record(const ProjectedGradientRecord& rec, std::uint32_t k,
                      std::vector<char>& buf) {
    buf.resize(record_size(k));
    char* p = buf.data();
    std::memcpy(p, &rec.sample_id, 8); p += 8;
    std::memcpy(p, &rec.loss_kind, 1); p += 1;
    std::memcpy(p, &rec.n_timesteps, 4); p += 4;
    std::memcpy(p, &rec.norm_pre_projection, 4); p += 4;
    std::memcpy(p, rec.g_proj.data(), static_cast<std::size_t>(k) * 4);
}

}  // namespace

GradientStoreWriter::GradientStoreWriter(const std::string& path, std::uint32_t k,
                                         std::uint64_t projector_seed,
                                         const Fingerprint& fingerprint)
    : path_(path), k_(k) {
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw StorageError("cannot open gradient store for writing: " + path);
    file_.write(kMagic, 4);
    file_.write(reinterpret_cast<const char*>(&kVersion), 4);
    file_.write(reinterpret_cast<const char*>(&k_), 4);
    std::uint64_t zero = 0;
    file_.write(reinterpret_cast<const char*>(&zero), 8);
    file_.write(reinterpret_cast<const char*>(&projector_seed), 8);
    file_.write(reinterpret_cast<const char*>(fingerprint.bytes.data()), 16);
    if (!file_) throw StorageError("gradient store header write failed: " + path);
}

GradientStoreWriter::~GradientStoreWriter() {
    if (!finalized_) {
        try {
            finalize();
        } catch (...) {
        }
    }
}

void GradientStoreWriter::append(const ProjectedGradientRecord& rec) {
    if (finalized_) throw StorageError("append to finalized gradient store: " + path_);
    if (rec.g_proj.size() != k_)
        throw StorageError("record k mismatch in gradient store append");
    for (float v : rec.g_proj)
        if (!std::isfinite(v)) throw NumericalError("non-finite projected gradient in append");
    if (!seen_ids_.insert(rec.sample_id).second)
        throw ConflictError("duplicate sample_id " + std::to_string(rec.sample_id) +
                            " in gradient store");
    std::vector<char> buf;
    serialize_record(rec, k_, buf);
    crc_.update(buf.data(), buf.size());
    file_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    file_.flush();
    if (!file_) throw StorageError("gradient store append failed: " + path_);
    ++count_;
}

void GradientStoreWriter::finalize() {
    if (finalized_) return;
    finalized_ = true;
    std::uint64_t crc = crc_.value();
    file_.write(reinterpret_cast<const char*>(&crc), 8);
    file_.seekp(kCountOffset);
    file_.write(reinterpret_cast<const char*>(&count_), 8);
    file_.flush();
    file_.close();
    if (file_.fail()) throw StorageError("gradient store finalize failed: " + path_);
}

GradientStoreReader::GradientStoreReader(const std::string& path) : path_(path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StorageError("cannot open gradient store: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw StorageError("not a CTGS gradient store: " + path);
    std::uint32_t version;
    f.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion)
        throw StorageError("unsupported gradient store version " + std::to_string(version));
    header_.version = version;
    f.read(reinterpret_cast<char*>(&header_.k), 4);
    f.read(reinterpret_cast<char*>(&header_.count), 8);
    f.read(reinterpret_cast<char*>(&header_.projector_seed), 8);
    f.read(reinterpret_cast<char*>(header_.fingerprint.bytes.data()), 16);
    if (!f) throw StorageError("gradient store header truncated: " + path);
    body_begin_ = kHeaderSize;

    auto expected = static_cast<std::uintmax_t>(kHeaderSize) +
                    header_.count * record_size(header_.k) + 8;
    std::error_code ec;
    auto actual = std::filesystem::file_size(path, ec);
    if (ec || actual != expected)
        throw StorageError("gradient store size mismatch (corrupt or unfinalized): " + path);
}

void GradientStoreReader::for_each(const std::function<void(const ProjectedGradientRecord&)>& fn) {
    std::ifstream f(path_, std::ios::binary);
    if (!f) throw StorageError("cannot open gradient store: " + path_);
    f.seekg(body_begin_);
    Crc64 crc;
    std::vector<char> buf(record_size(header_.k));
    ProjectedGradientRecord rec;
    rec.g_proj.resize(header_.k);
    for (std::uint64_t i = 0; i < header_.count; ++i) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw StorageError("gradient store truncated: " + path_);
        crc.update(buf.data(), buf.size());
        const char* p = buf.data();
        std::memcpy(&rec.sample_id, p, 8); p += 8;
        std::memcpy(&rec.loss_kind, p, 1); p += 1;
        std::memcpy(&rec.n_timesteps, p, 4); p += 4;
        std::memcpy(&rec.norm_pre_projection, p, 4); p += 4;
        std::memcpy(rec.g_proj.data(), p, static_cast<std::size_t>(header_.k) * 4);
        fn(rec);
    }
    std::uint64_t stored;
    f.read(reinterpret_cast<char*>(&stored), 8);
    if (!f) throw StorageError("gradient store footer missing: " + path_);
    if (stored != crc.value())
        throw StorageError("gradient store checksum mismatch: " + path_);
}

std::vector<ProjectedGradientRecord> GradientStoreReader::read_all() {
    std::vector<ProjectedGradientRecord> out;
    out.reserve(header_.count);
    for_each([&](const ProjectedGradientRecord& r) { out.push_back(r); });
    return out;
}

}  // namespace ctrak
