#include "gatediag/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace gatediag {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x31444447;  // "GDD1"
constexpr std::uint32_t kDatasetVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

template <typename T>
void write_pod(std::FILE* f, const T& value) {
  if (std::fwrite(&value, sizeof(T), 1, f) != 1)
    throw std::runtime_error("short write");
}

template <typename T>
T read_pod(std::FILE* f) {
  T value;
  if (std::fread(&value, sizeof(T), 1, f) != 1)
    throw std::runtime_error("short read");
  return value;
}

void write_doubles(std::FILE* f, const double* data, std::size_t n) {
  if (std::fwrite(data, sizeof(double), n, f) != n)
    throw std::runtime_error("short write");
}

void read_doubles(std::FILE* f, double* data, std::size_t n) {
  if (std::fread(data, sizeof(double), n, f) != n)
    throw std::runtime_error("short read");
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  FilePtr f = open_or_throw(path, "wb");
  write_pod(f.get(), kDatasetMagic);
  write_pod(f.get(), kDatasetVersion);
  write_pod(f.get(), static_cast<std::uint32_t>(data.input_dim));
  write_pod(f.get(), static_cast<std::uint32_t>(data.seq_len));
  write_pod(f.get(), static_cast<std::uint64_t>(data.sequences.size()));
  std::vector<double> row_major;
  for (const Sequence& seq : data.sequences) {
    row_major.resize(static_cast<std::size_t>(seq.inputs.size()));
    for (int t = 0; t < data.seq_len; ++t)
      for (int d = 0; d < data.input_dim; ++d)
        row_major[static_cast<std::size_t>(t) * data.input_dim + d] =
            seq.inputs(t, d);
    write_doubles(f.get(), row_major.data(), row_major.size());
    write_doubles(f.get(), seq.targets.data(),
                  static_cast<std::size_t>(seq.targets.size()));
    if (std::fwrite(seq.valid.data(), 1, seq.valid.size(), f.get()) !=
        seq.valid.size())
      throw std::runtime_error("short write");
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  FilePtr f = open_or_throw(path, "rb");
  if (read_pod<std::uint32_t>(f.get()) != kDatasetMagic)
    throw std::runtime_error(path.string() + ": not a dataset file");
  if (read_pod<std::uint32_t>(f.get()) != kDatasetVersion)
    throw std::runtime_error(path.string() + ": unsupported dataset version");
  Dataset data;
  data.input_dim = static_cast<int>(read_pod<std::uint32_t>(f.get()));
  data.seq_len = static_cast<int>(read_pod<std::uint32_t>(f.get()));
  const std::uint64_t count = read_pod<std::uint64_t>(f.get());
  data.sequences.resize(count);
  std::vector<double> row_major(static_cast<std::size_t>(data.input_dim) *
                                data.seq_len);
  for (Sequence& seq : data.sequences) {
    read_doubles(f.get(), row_major.data(), row_major.size());
    seq.inputs.resize(data.seq_len, data.input_dim);
    for (int t = 0; t < data.seq_len; ++t)
      for (int d = 0; d < data.input_dim; ++d)
        seq.inputs(t, d) =
            row_major[static_cast<std::size_t>(t) * data.input_dim + d];
    seq.targets.resize(data.seq_len);
    read_doubles(f.get(), seq.targets.data(),
                 static_cast<std::size_t>(data.seq_len));
    seq.valid.resize(static_cast<std::size_t>(data.seq_len));
    if (std::fread(seq.valid.data(), 1, seq.valid.size(), f.get()) !=
        seq.valid.size())
      throw std::runtime_error("short read");
  }
  return data;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_checkpoint(const std::filesystem::path& path,
                      const ModelParams& model) {
  FilePtr f = open_or_throw(path, "wb");
  std::fprintf(f.get(), "gatediag-checkpoint 1\n");
  std::fprintf(f.get(), "kind %s\n", kind_name(model.cell.kind).c_str());
  std::fprintf(f.get(), "const_gate %s\n",
               format_double(model.cell.kind.const_gate_value).c_str());
  std::fprintf(f.get(), "D %d\nH %d\n", model.cell.input_dim,
               model.cell.hidden_dim);

  auto write_matrix = [&](const char* name, const Mat& m) {
    std::fprintf(f.get(), "tensor %s %td %td\n", name, m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        std::fprintf(f.get(), "%s%s", c ? " " : "",
                     format_double(m(r, c)).c_str());
      std::fputc('\n', f.get());
    }
  };
  // Biases serialize as single-row tensors; matrices keep their shape.
  const CellParams& p = model.cell;
  switch (p.kind.tag) {
    case CellTag::ConstGate:
      write_matrix("W_h", p.W_h); write_matrix("U_h", p.U_h);
      write_matrix("b_h", p.b_h.transpose());
      break;
    case CellTag::SharedGate:
      write_matrix("W_h", p.W_h); write_matrix("U_h", p.U_h);
      write_matrix("b_h", p.b_h.transpose());
      write_matrix("w_s", p.w_s.transpose());
      write_matrix("u_s", p.u_s.transpose());
      write_matrix("b_s", Mat::Constant(1, 1, p.b_s_scalar));
      break;
    case CellTag::DiagGate:
      write_matrix("W_h", p.W_h); write_matrix("U_h", p.U_h);
      write_matrix("b_h", p.b_h.transpose());
      write_matrix("W_s", p.W_s); write_matrix("U_s", p.U_s);
      write_matrix("b_s", p.b_s.transpose());
      break;
    case CellTag::GRU:
      write_matrix("W_z", p.W_z); write_matrix("U_z", p.U_z);
      write_matrix("b_z", p.b_z.transpose());
      write_matrix("W_r", p.W_r); write_matrix("U_r", p.U_r);
      write_matrix("b_r", p.b_r.transpose());
      write_matrix("W_h", p.W_h); write_matrix("U_h", p.U_h);
      write_matrix("b_h", p.b_h.transpose());
      break;
    case CellTag::LSTM:
      write_matrix("W_i", p.W_i); write_matrix("U_i", p.U_i);
      write_matrix("b_i", p.b_i.transpose());
      write_matrix("W_f", p.W_f); write_matrix("U_f", p.U_f);
      write_matrix("b_f", p.b_f.transpose());
      write_matrix("W_o", p.W_o); write_matrix("U_o", p.U_o);
      write_matrix("b_o", p.b_o.transpose());
      write_matrix("W_g", p.W_g); write_matrix("U_g", p.U_g);
      write_matrix("b_g", p.b_g.transpose());
      break;
  }
  write_matrix("w_out", model.w_out.transpose());
  write_matrix("b_out", Mat::Constant(1, 1, model.b_out));
  std::fprintf(f.get(), "end\n");
}

namespace {

Mat parse_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c)))
        throw std::runtime_error("checkpoint: truncated tensor");
  return m;
}

}  // namespace

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string token;
  int version = 0;
  in >> token >> version;
  if (token != "gatediag-checkpoint" || version != 1)
    throw std::runtime_error(path.string() + ": not a checkpoint file");

  std::string kind_label;
  double const_gate = 0.5;
  int D = 0, H = 0;
  in >> token >> kind_label;          // kind
  in >> token >> const_gate;          // const_gate
  in >> token >> D >> token >> H;     // D, H

  ModelParams model;
  model.cell = init_params(make_kind(kind_label, const_gate), D, H, 0);
  // Overwrite the shaped tensors from the stream.
  std::map<std::string, Mat> tensors;
  while (in >> token) {
    if (token == "end") break;
    if (token != "tensor")
      throw std::runtime_error("checkpoint: unexpected token " + token);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    in >> name >> rows >> cols;
    tensors[name] = parse_matrix(in, rows, cols);
  }
  auto take_mat = [&](const char* name) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error(std::string("checkpoint: missing tensor ") + name);
    return it->second;
  };
  auto take_vec = [&](const char* name) {
    return Vec(take_mat(name).row(0).transpose());
  };

  CellParams& p = model.cell;
  switch (p.kind.tag) {
    case CellTag::ConstGate:
      p.W_h = take_mat("W_h"); p.U_h = take_mat("U_h"); p.b_h = take_vec("b_h");
      break;
    case CellTag::SharedGate:
      p.W_h = take_mat("W_h"); p.U_h = take_mat("U_h"); p.b_h = take_vec("b_h");
      p.w_s = take_vec("w_s"); p.u_s = take_vec("u_s");
      p.b_s_scalar = take_mat("b_s")(0, 0);
      break;
    case CellTag::DiagGate:
      p.W_h = take_mat("W_h"); p.U_h = take_mat("U_h"); p.b_h = take_vec("b_h");
      p.W_s = take_mat("W_s"); p.U_s = take_mat("U_s"); p.b_s = take_vec("b_s");
      break;
    case CellTag::GRU:
      p.W_z = take_mat("W_z"); p.U_z = take_mat("U_z"); p.b_z = take_vec("b_z");
      p.W_r = take_mat("W_r"); p.U_r = take_mat("U_r"); p.b_r = take_vec("b_r");
      p.W_h = take_mat("W_h"); p.U_h = take_mat("U_h"); p.b_h = take_vec("b_h");
      break;
    case CellTag::LSTM:
      p.W_i = take_mat("W_i"); p.U_i = take_mat("U_i"); p.b_i = take_vec("b_i");
      p.W_f = take_mat("W_f"); p.U_f = take_mat("U_f"); p.b_f = take_vec("b_f");
      p.W_o = take_mat("W_o"); p.U_o = take_mat("U_o"); p.b_o = take_vec("b_o");
      p.W_g = take_mat("W_g"); p.U_g = take_mat("U_g"); p.b_g = take_vec("b_g");
      break;
  }
  model.w_out = take_vec("w_out");
  model.b_out = take_mat("b_out")(0, 0);
  return model;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::string& header) {
  file = std::fopen(path.string().c_str(), "wb");
  if (!file) throw std::runtime_error("cannot open " + path.string());
  std::fprintf(file, "%s\n", header.c_str());
}

CsvWriter::~CsvWriter() {
  if (file) std::fclose(file);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k)
    std::fprintf(file, "%s%s", k ? "," : "", cells[k].c_str());
  std::fputc('\n', file);
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  FilePtr f = open_or_throw(path, "rb");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  unsigned char buf[1 << 16];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f.get())) > 0)
    for (std::size_t i = 0; i < got; ++i) {
      h ^= buf[i];
      h *= 0x100000001b3ULL;
    }
  return h;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
}

}  // namespace gatediag
