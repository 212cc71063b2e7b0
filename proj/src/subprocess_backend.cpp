#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <sstream>

#include "embercall/backends.hpp"
#include "nlohmann/json.hpp"

namespace embercall {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += '\'';
  return out;
}

/// Scratch directory removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::string pattern = (fs::temp_directory_path() / "embercall-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw RuntimeError("cannot create scratch directory");
    path_ = pattern;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct ProcessResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

ProcessResult run_backend(const std::string& command, const fs::path& input, const char* mode, const fs::path& scratch) {
  const fs::path err_path = scratch / "stderr.txt";
  const std::string cmdline = command + " --input " + shell_quote(input.string()) + " --mode " + mode + " 2>" +
                              shell_quote(err_path.string());
  FILE* pipe = ::popen(cmdline.c_str(), "r");
  if (pipe == nullptr) throw RuntimeError("cannot launch backend: " + command);
  ProcessResult result;
  char buf[1 << 16];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.out.append(buf, got);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
  std::error_code ec;
  if (fs::exists(err_path, ec)) result.err = read_file(err_path);
  return result;
}

[[noreturn]] void backend_failed(const std::string& command, const char* mode, const ProcessResult& r) {
  std::ostringstream msg;
  msg << "backend '" << command << "' failed in " << mode << " mode (exit " << r.exit_code << ")";
  if (!r.err.empty()) msg << ": " << trim(r.err);
  throw RuntimeError(msg.str());
}

}  // namespace

SeparationResult SubprocessSeparator::separate(const AudioClip& clip, int num_sources) const {
  if (num_sources != 4 && num_sources != 8)
    throw ValidationError("separate: num_sources must be 4 or 8, got " + std::to_string(num_sources));
  ScratchDir scratch;
  const fs::path input = scratch.path() / (clip.stem.empty() ? std::string("input.wav") : clip.stem + ".wav");
  write_wav(input, clip);
  const auto r = run_backend(command_, input, "separate", scratch.path());
  if (r.exit_code != 0) backend_failed(command_, "separate", r);

  nlohmann::json reply;
  for (const auto& line : split(r.out, '\n')) {
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (reply.contains("sources")) break;
  }
  if (!reply.contains("sources") || !reply["sources"].is_array())
    throw RuntimeError("backend '" + command_ + "' did not print a {\"sources\": [...]} object");
  const auto& paths = reply["sources"];
  if (static_cast<int>(paths.size()) != num_sources)
    throw RuntimeError("backend returned " + std::to_string(paths.size()) + " sources, expected " +
                       std::to_string(num_sources));
  SeparationResult result;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    fs::path p = paths[k].get<std::string>();
    if (p.is_relative()) p = scratch.path() / p;
    AudioClip source = read_wav(p);
    source.stem = clip.stem + "_" + source_name(k);
    if (source.samples.size() != clip.samples.size() || source.sample_rate != clip.sample_rate) {
      if (source.sample_rate != clip.sample_rate) source = resample(source, clip.sample_rate);
      source.samples.resize(clip.samples.size(), 0.0f);
    }
    result.sources.push_back(std::move(source));
  }
  return result;
}

std::vector<EmbedderOutput> SubprocessEmbedder::embed_windows(const AudioClip& clip) const {
  if (window_count(clip.samples.size(), clip.sample_rate, kWindowSeconds, kHopSeconds) == 0)
    throw ValidationError("embed: clip '" + clip.stem + "' is shorter than 3 s");
  ScratchDir scratch;
  const fs::path input = scratch.path() / "input.wav";
  write_wav(input, clip);
  const auto r = run_backend(command_, input, "embed", scratch.path());
  if (r.exit_code != 0) backend_failed(command_, "embed", r);
  std::vector<EmbedderOutput> out;
  for (const auto& line : split(r.out, '\n')) out.push_back(decode_embedder_output(line, embed_dim_, class_dim_));
  return out;
}

}  // namespace embercall
