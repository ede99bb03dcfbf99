#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/errors.hpp"

namespace routegraph::distill {

// Recursive structural type of a JSON value. `optional` marks a field that
// may be absent or null (set during cross-sample unification).
struct ResponseShape {
    enum class Kind { object, array, string, number, boolean, null_kind };

    Kind kind = Kind::null_kind;
    bool optional = false;
    std::map<std::string, ResponseShape> fields; // kind == object
    std::shared_ptr<ResponseShape> element;      // kind == array, always set

    bool operator==(const ResponseShape& other) const;

    static ResponseShape scalar(Kind k, bool opt = false);
    static ResponseShape object(std::map<std::string, ResponseShape> fields = {});
    static ResponseShape array(ResponseShape element);
};

const char* kind_name(ResponseShape::Kind kind);
ResponseShape::Kind kind_from_name(const std::string& name);

ResponseShape infer_shape(const nlohmann::json& value);
// Throws NotStructured when the body does not parse as JSON.
ResponseShape infer_shape_from_text(const std::string& body);

// Field-union unification: fields present on one side only become optional;
// null unified with a concrete kind yields that kind marked optional; on a
// kind conflict the left kind wins and the result is marked optional.
ResponseShape unify(const ResponseShape& a, const ResponseShape& b);

// A canonical value conforming to the shape (arrays render two elements so
// inference can recover the element shape; null-element arrays render []).
nlohmann::json render_example(const ResponseShape& shape);

// Leaf and node paths: ".name:string", ".items[]:object", ".items[].id:number".
// Optional nodes carry a trailing '?'. Sorted, deterministic.
std::vector<std::string> flatten_shape(const ResponseShape& shape);

// Compact single-line rendering for manifests: {id: number, tags: [string]}.
std::string shape_to_string(const ResponseShape& shape);

nlohmann::json shape_to_json(const ResponseShape& shape);
ResponseShape shape_from_json(const nlohmann::json& j);

} // namespace routegraph::distill
