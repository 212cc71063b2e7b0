// Speaks the external backend protocol with the synthetic backends:
//   embercall_fake_backend --input <wav> --mode separate|embed
// separate writes <input>_source{K}.wav beside the input and prints
// {"sources": [...]}; embed prints one NDJSON line per 3 s window.
// EMBERCALL_FAKE_FAIL=<mode> makes that mode fail; EMBERCALL_FAKE_SOURCES
// sets the source count (default 4).

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "embercall/backends.hpp"
#include "nlohmann/json.hpp"

using namespace embercall;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic backend speaking the subprocess protocol"};
  std::string input, mode;
  app.add_option("--input", input, "Input WAV")->required();
  app.add_option("--mode", mode, "separate or embed")->required()->check(CLI::IsMember({"separate", "embed"}));
  CLI11_PARSE(app, argc, argv);

  if (const char* fail = std::getenv("EMBERCALL_FAKE_FAIL"); fail != nullptr && (mode == fail || std::string(fail) == "all")) {
    std::cerr << "fake backend: simulated " << mode << " failure\n";
    return 3;
  }
  try {
    const AudioClip clip = read_wav(input);
    if (mode == "separate") {
      int sources = kDefaultNumSources;
      if (const char* n = std::getenv("EMBERCALL_FAKE_SOURCES")) sources = std::atoi(n);
      const SyntheticSeparator separator;
      const auto result = separator.separate(resample(clip, separator.sample_rate()), sources);
      const fs::path in = input;
      nlohmann::json paths = nlohmann::json::array();
      for (std::size_t k = 0; k < result.sources.size(); ++k) {
        const fs::path out = in.parent_path() / (in.stem().string() + "_" + source_name(k) + ".wav");
        write_wav(out, result.sources[k]);
        paths.push_back(out.string());
      }
      std::cout << nlohmann::json{{"sources", paths}}.dump() << '\n';
    } else {
      const SyntheticEmbedder embedder;
      for (const auto& o : embedder.embed_windows(resample(clip, embedder.sample_rate())))
        std::cout << encode_embedder_output(o) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "fake backend: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
