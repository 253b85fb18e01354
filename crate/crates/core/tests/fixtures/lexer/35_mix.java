// file header
package a.b;

import java.util.*;

public class Mix35 {
	String quoted() {
		String a = "she said \"hi\"";
		String b = "back\\slash\\";
		String c = "\\\"";
		return a + b + c;
	}

	/**/ int a = 1; /***/ int b = 2;
	/* /* not nested */ int c = 3;

	@SuppressWarnings({"unchecked", "rawtypes"})
	@Deprecated(since = "1.2", forRemoval = true)
	void legacy() {}

	String kind(int n) {
		return switch (n) {
			case 1 -> "one";
			case 2 -> { yield "two"; }
			default -> "many";
		};
	}

	String block() {
		return """
			Hello "world" \""" still inside
			// no comment here
			""";
	}
}
