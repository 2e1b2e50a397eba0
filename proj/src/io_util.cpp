#include "ctwin/io_util.hpp"

#include <cstdio>
#include <filesystem>

namespace ctwin::io {

void AtomicFileWriter::commit() {
    stream_.flush();
    if (!stream_)
        throw numeric_error("write failed for: " + tmp_);
    stream_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec)
        throw numeric_error("cannot move " + tmp_ + " into place: " + ec.message());
    committed_ = true;
}

AtomicFileWriter::~AtomicFileWriter() {
    if (!committed_) {
        if (stream_.is_open())
            stream_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_, ec);
    }
}

} // namespace ctwin::io
