#include "evidistill/http.hpp"

#include "httplib.h"

#include "evidistill/error.hpp"

namespace evidistill {

ParsedUrl parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error(ErrorCode::ConfigInvalid, "URL without scheme: " + std::string(url));
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
        c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0F]);
    }
  }
  return out;
}

HttpResponse http_send(const HttpRequest& request) {
  auto url = parse_url(request.url);
  httplib::Client client(url.scheme_host_port);
  const auto sec = static_cast<time_t>(request.timeout_seconds);
  const auto usec = static_cast<time_t>((request.timeout_seconds - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  client.set_follow_location(true);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(url.path_and_query, headers);
  } else if (request.method == "POST") {
    result = client.Post(url.path_and_query, headers, request.body,
                         request.content_type.empty() ? "application/octet-stream" : request.content_type);
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unsupported HTTP method " + request.method);
  }

  if (!result) {
    auto err = result.error();
    const auto what = httplib::to_string(err) + " (" + request.url + ")";
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::Timeout, what);
    }
    throw Error(ErrorCode::NetworkFailure, what);
  }
  return {result->status, result->body};
}

}  // namespace evidistill
