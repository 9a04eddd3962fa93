#include "fgwarp/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "fgwarp/flownet.hpp"
#include "fgwarp/image_io.hpp"
#include "fgwarp/io_util.hpp"

namespace fgwarp {

namespace fs = std::filesystem;

namespace {

std::string frame_name(int i, const char* ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d%s", i, ext);
    return buf;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

fs::path write_dataset(const std::vector<std::string>& names,
                       const std::vector<RenderedVideo>& videos, const fs::path& root) {
    require(names.size() == videos.size(), "write_dataset: names/videos size mismatch");
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("write_dataset: cannot create " + root.string() + ": " + ec.message());

    std::string manifest = "fgwarp-dataset v1\n";
    for (std::size_t v = 0; v < videos.size(); ++v) {
        const RenderedVideo& vid = videos[v];
        require(!vid.frames.empty() && vid.frames.size() == vid.masks.size() &&
                    vid.flows.size() + 1 == vid.frames.size(),
                "write_dataset: video '" + names[v] + "' has inconsistent frame counts");
        const fs::path vdir = root / names[v];
        fs::create_directories(vdir / "frames");
        fs::create_directories(vdir / "masks");
        fs::create_directories(vdir / "flow");
        for (std::size_t t = 0; t < vid.frames.size(); ++t) {
            write_ppm(vdir / "frames" / frame_name(int(t), ".ppm"), vid.frames[t]);
            write_pgm(vdir / "masks" / frame_name(int(t), ".pgm"), vid.masks[t]);
        }
        for (std::size_t t = 0; t < vid.flows.size(); ++t)
            write_flo(vdir / "flow" / frame_name(int(t), ".flo"), vid.flows[t]);

        const double canvas = double(vid.frames[0].h()) * vid.frames[0].w();
        manifest += "video " + names[v] + " frames " + std::to_string(vid.frames.size()) +
                    " height " + std::to_string(vid.frames[0].h()) + " width " +
                    std::to_string(vid.frames[0].w()) + "\n";
        // shadow coverage of the first frame, derived from the mask itself so
        // rewriting loaded data reproduces the manifest byte for byte
        int px = 0;
        for (std::size_t i = 0; i < vid.masks[0].size(); ++i) px += vid.masks[0].data()[i] == 1.0;
        char line[128];
        std::snprintf(line, sizeof line, "area %s px %d frac %.6f\n", names[v].c_str(), px,
                      px / canvas);
        manifest += line;
    }
    const fs::path mpath = root / "manifest.txt";
    atomic_write_text(mpath, manifest);
    return mpath;
}

Dataset load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("load_dataset: no such directory: " + root.string());

    std::vector<fs::path> vdirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::is_directory(e.path() / "frames")) vdirs.push_back(e.path());
    std::sort(vdirs.begin(), vdirs.end());
    if (vdirs.empty())
        throw IoError("load_dataset: no video directories under " + root.string());

    Dataset ds;
    for (const fs::path& vdir : vdirs) {
        VideoData vid;
        vid.name = vdir.filename().string();
        const std::string tag = "load_dataset: video '" + vid.name + "'";

        for (const fs::path& f : sorted_files(vdir / "frames")) vid.frames.push_back(read_image(f));
        if (vid.frames.empty()) throw IoError(tag + ": no frames");
        const int h = vid.frames[0].h(), w = vid.frames[0].w();
        for (const Tensor4& f : vid.frames)
            if (f.c() != 3 || f.h() != h || f.w() != w)
                throw IoError(tag + ": frames must all be RGB with equal dimensions");

        if (!fs::is_directory(vdir / "masks")) throw IoError(tag + ": missing masks directory");
        for (const fs::path& f : sorted_files(vdir / "masks")) vid.masks.push_back(read_image(f));
        if (vid.masks.size() != vid.frames.size())
            throw IoError(tag + ": " + std::to_string(vid.masks.size()) + " masks for " +
                          std::to_string(vid.frames.size()) + " frames");
        for (const Tensor4& m : vid.masks)
            if (m.c() != 1 || m.h() != h || m.w() != w)
                throw IoError(tag + ": masks must be grayscale at frame resolution");

        if (fs::is_directory(vdir / "flow")) {
            for (const fs::path& f : sorted_files(vdir / "flow"))
                vid.flows.push_back(read_flo(f));
            if (!vid.flows.empty()) {
                if (vid.flows.size() + 1 != vid.frames.size())
                    throw IoError(tag + ": " + std::to_string(vid.flows.size()) +
                                  " flow fields for " + std::to_string(vid.frames.size()) +
                                  " frames (need frames-1)");
                for (const FlowField& f : vid.flows)
                    if (f.h() != h || f.w() != w)
                        throw IoError(tag + ": flow fields must match frame resolution");
            }
        }
        ds.videos.push_back(std::move(vid));
    }
    return ds;
}

}  // namespace fgwarp
