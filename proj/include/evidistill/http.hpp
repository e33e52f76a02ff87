#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evidistill {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::string body;
  std::string content_type;
  std::vector<std::pair<std::string, std::string>> headers;
  double timeout_seconds = 30.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;

  bool ok() const { return status >= 200 && status < 300; }
};

// Blocking request. Transport failures throw Error(Timeout) for timeouts
// and Error(NetworkFailure) otherwise; HTTP status codes are returned as-is.
HttpResponse http_send(const HttpRequest& request);

std::string url_encode(std::string_view s);

struct ParsedUrl {
  std::string scheme_host_port;  // "https://example.com:8443"
  std::string path_and_query;    // "/v1/x?y=1"
};

ParsedUrl parse_url(std::string_view url);

}  // namespace evidistill
