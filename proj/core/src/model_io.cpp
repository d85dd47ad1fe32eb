#include "foresttrav/model_io.hpp"

#include <fstream>

#include "foresttrav/error.hpp"
#include "foresttrav/io_util.hpp"

namespace foresttrav {

namespace {

constexpr char kModelMagic[4] = {'F', 'T', 'N', 'N'};
constexpr uint16_t kModelVersion = 1;

void write_tensor(std::ostream& out, const TensorRef& ref) {
  write_le(out, static_cast<uint16_t>(ref.name.size()));
  out.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
  write_le(out, static_cast<uint64_t>(ref.values->size()));
  out.write(reinterpret_cast<const char*>(ref.values->data()),
            static_cast<std::streamsize>(ref.values->size() * sizeof(float)));
}

void read_tensor(std::istream& in, const TensorRef& ref,
                 const std::string& path) {
  const auto name_len = read_le<uint16_t>(in, "tensor name length");
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (!in) throw TruncatedError("truncated tensor name in " + path);
  if (name != ref.name) {
    throw FormatError("unexpected tensor '" + name + "' in " + path +
                      " (expected '" + ref.name + "')");
  }
  const auto count = read_le<uint64_t>(in, "tensor size");
  if (count != ref.values->size()) {
    throw FormatError("tensor '" + name + "' in " + path + " has " +
                      std::to_string(count) + " values (expected " +
                      std::to_string(ref.values->size()) + ")");
  }
  in.read(reinterpret_cast<char*>(ref.values->data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw TruncatedError("truncated tensor '" + name + "' in " + path);
}

}  // namespace

void save_model(UNetModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open model file for writing: " + path);
  write_magic(out, kModelMagic);
  write_le(out, kModelVersion);

  // Architecture descriptor.
  write_le(out, static_cast<uint16_t>(kFeatureDim));
  write_le(out, static_cast<uint16_t>(2));
  write_le(out, static_cast<uint8_t>(kUNetChannels.size()));
  for (std::size_t c : kUNetChannels) {
    write_le(out, static_cast<uint16_t>(c));
  }
  for (float m : model.norm.mean) write_le(out, m);
  for (float s : model.norm.stddev) write_le(out, s);

  const auto params = parameter_tensors(model);
  const auto buffers = buffer_tensors(model);
  write_le(out, static_cast<uint32_t>(params.size() + buffers.size()));
  for (const TensorRef& ref : params) write_tensor(out, ref);
  for (const TensorRef& ref : buffers) write_tensor(out, ref);
  if (!out) throw FormatError("write failed for model file: " + path);
}

UNetModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file: " + path);
  expect_magic(in, kModelMagic, "model file");
  expect_version(in, kModelVersion, "model file");

  const auto in_dim = read_le<uint16_t>(in, "input dimension");
  const auto out_dim = read_le<uint16_t>(in, "output dimension");
  const auto levels = read_le<uint8_t>(in, "level count");
  if (in_dim != kFeatureDim || out_dim != 2 ||
      levels != kUNetChannels.size()) {
    throw FormatError("model architecture in " + path +
                      " does not match this build");
  }
  for (std::size_t expected : kUNetChannels) {
    const auto c = read_le<uint16_t>(in, "channel width");
    if (c != expected) {
      throw FormatError("model channel plan in " + path +
                        " does not match this build");
    }
  }

  UNetModel model = make_unet(0);
  for (float& m : model.norm.mean) m = read_le<float>(in, "feature mean");
  for (float& s : model.norm.stddev) s = read_le<float>(in, "feature stddev");

  const auto params = parameter_tensors(model);
  const auto buffers = buffer_tensors(model);
  const auto tensor_count = read_le<uint32_t>(in, "tensor count");
  if (tensor_count != params.size() + buffers.size()) {
    throw FormatError("model file " + path + " holds " +
                      std::to_string(tensor_count) + " tensors (expected " +
                      std::to_string(params.size() + buffers.size()) + ")");
  }
  for (const TensorRef& ref : params) read_tensor(in, ref, path);
  for (const TensorRef& ref : buffers) read_tensor(in, ref, path);
  return model;
}

void write_training_log(const std::vector<EpochStats>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open training log for writing: " + path);
  out << "epoch,train_loss,val_loss,seconds\n";
  for (const EpochStats& e : log) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ','
        << e.seconds << '\n';
  }
  if (!out) throw FormatError("write failed for training log: " + path);
}

}  // namespace foresttrav
