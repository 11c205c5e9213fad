// Reference tracker peer: serves one session of the wire protocol on stdin/stdout (or one TCP
// connection) with any in-process backend, e.g. `skitb_peer video.txt oracle:2`.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "skitb/datamodel.hpp"
#include "skitb/error.hpp"
#include "skitb/evaluation.hpp"
#include "skitb/wire.hpp"

int main(int argc, char** argv) {
    std::string annotation;
    std::string backend = "oracle";
    std::uint64_t seed = 0;
    int port = -1;
    CLI::App app{"Wire-protocol tracker peer"};
    app.add_option("annotation", annotation, "Annotation file of the sequence")->required();
    app.add_option("backend", backend, "In-process backend spec")->capture_default_str();
    app.add_option("--seed", seed)->capture_default_str();
    app.add_option("--tcp", port, "Serve one TCP connection on this loopback port instead of stdio");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto video = skitb::data::load_annotations(annotation);
        auto inner = skitb::eval::make_backend(backend, video, annotation, seed);
        if (port >= 0) {
            skitb::wire::TcpListener listener(static_cast<std::uint16_t>(port));
            std::printf("%u\n", static_cast<unsigned>(listener.port()));
            std::fflush(stdout);
            auto conn = listener.accept();
            return skitb::wire::serve(*conn, *inner);
        }
        skitb::wire::FdTransport io(0, 1);
        return skitb::wire::serve(io, *inner);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "skitb_peer: %s\n", e.what());
        return 2;
    }
}
