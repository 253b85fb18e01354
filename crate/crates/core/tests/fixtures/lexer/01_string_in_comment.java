// file header
package a.b;

import java.util.*;

public class StringInComment {
    // prints "hello" and then "world
    /* a "string" that never closes: " */
    void greet() { System.out.println("hello"); }
}
